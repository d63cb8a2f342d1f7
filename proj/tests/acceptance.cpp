// Copyright 2026 The flowgraph Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <unistd.h>

#include "flowgraph/cli.hpp"
#include "flowgraph/eval.hpp"
#include "flowgraph/synth.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace fg = flowgraph;
using fg::testing::LossFn;
using fg::testing::max_relative_error;
using fg::testing::random_param;
using fg::testing::T64;
using fg::testing::Tape64;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome pass_if(bool ok, const std::string& detail) {
  return {ok ? Verdict::kPass : Verdict::kFail, detail};
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

fg::FlowGraph random_graph(std::size_t n, fg::Rng& rng) {
  fg::EdgeSet e;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(0.5)) e.emplace(i, j);
    }
  }
  return fg::FlowGraph(n, e);
}

// Analytic vs central-difference gradients for each differentiable piece.
Outcome gradient_oracle() {
  constexpr int kInstances = 50;
  constexpr double kTolerance = 1e-4;
  fg::Rng rng(101);
  std::map<std::string, double> worst;
  for (int trial = 0; trial < kInstances; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    const std::size_t d_in = 1 + rng.below(16);
    const std::size_t d_out = 1 + rng.below(16);
    const auto g = random_graph(n, rng);
    auto h = random_param(n, d_in, rng);
    auto mix = random_param(n, d_out, rng);
    mix.set_requires_grad(false);
    auto note = [&](const std::string& what, double err) {
      worst[what] = std::max(worst[what], err);
    };

    auto gcn = fg::GcnLayer<double>::init(d_in, d_out, rng);
    for (auto& v : gcn.bias.values()) v = rng.uniform(-1, 1);
    note("gcn", max_relative_error({gcn.theta, gcn.bias, h}, [&](Tape64& t) {
           return fg::sum(t, fg::mul(t, fg::gcn_forward(t, gcn, h, g), mix));
         }));

    const std::size_t heads = 1 + rng.below(3);
    auto gat = fg::GatLayer<double>::init(d_in, d_out, heads, false, rng);
    for (auto& v : gat.bias.values()) v = rng.uniform(-1, 1);
    std::vector<T64> gat_params{gat.bias, h};
    for (const auto& hd : gat.heads) {
      gat_params.push_back(hd.theta);
      gat_params.push_back(hd.attention);
    }
    note("gat", max_relative_error(gat_params, [&](Tape64& t) {
           return fg::sum(t, fg::mul(t, fg::gat_forward(t, gat, h, g), mix));
         }));

    auto head = fg::PairHead<double>::init(d_in, rng);
    for (auto& v : head.bias1.values()) v = rng.uniform(-1, 1);
    std::vector<fg::Edge> pairs;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        pairs.emplace_back(i, j);
        labels.push_back(rng.bernoulli(0.3));
      }
    }
    if (!pairs.empty()) {
      const double w1 = rng.uniform(0.5, 15);
      note("head", max_relative_error(
                       {head.proj1, head.bias1, head.proj2, head.bias2, h},
                       [&](Tape64& t) {
                         fg::Rng fixed(trial);  // same dropout mask every call
                         return fg::weighted_ce(
                             t, fg::pair_logits(t, head, h, pairs, true, fixed),
                             labels, 1.0, w1);
                       }));
    }

    auto x = random_param(n, d_out, rng, 3.0);
    note("gelu", max_relative_error({x}, [&](Tape64& t) {
           return fg::sum(t, fg::mul(t, fg::gelu(t, x), mix));
         }));
    note("softmax", max_relative_error({x}, [&](Tape64& t) {
           return fg::sum(t, fg::mul(t, fg::softmax_rows(t, x), mix));
         }));

    const std::size_t m = 1 + rng.below(20);
    auto logits = random_param(m, 2, rng, 4.0);
    std::vector<int> y;
    for (std::size_t k = 0; k < m; ++k) y.push_back(rng.bernoulli(0.4));
    const double w0 = rng.uniform(0.1, 3), w1 = rng.uniform(0.1, 20);
    note("weighted_ce", max_relative_error({logits}, [&](Tape64& t) {
           return fg::weighted_ce(t, logits, y, w0, w1);
         }));
  }
  bool ok = true;
  std::string detail = std::to_string(kInstances) + " instances, max rel err:";
  for (const auto& [what, err] : worst) {
    ok = ok && err < kTolerance;
    detail += " " + what + "=" + fmt(err);
  }
  return pass_if(ok && worst.size() == 6, detail);
}

Outcome enumeration_oracle() {
  std::size_t checked = 0, mismatches = 0;
  for (const char* w : {"3", "4", "5", "all"}) {
    const auto window = *fg::parse_window(w);
    for (std::size_t n = 2; n <= 50; ++n) {
      ++checked;
      if (fg::comparison_count(n, window) !=
          fg::testing::brute_force_pairs(n, window)) {
        ++mismatches;
      }
    }
  }
  return pass_if(mismatches == 0, std::to_string(checked) + " (n, window) cases, " +
                                      std::to_string(mismatches) + " mismatches");
}

Outcome prauc_oracle() {
  fg::Rng rng(303);
  double worst = 0.0;
  std::vector<double> scores;
  std::vector<int> labels;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(1000);
    fg::testing::random_instance(rng, m, trial % 2 == 0, scores, labels);
    const double got = fg::prauc(scores, labels).average_precision;
    worst = std::max(worst, std::fabs(got - fg::testing::brute_force_prauc(scores, labels)));
  }
  return pass_if(worst <= 1e-9, "200 instances, max abs diff " + fmt(worst));
}

Outcome loss_identities() {
  fg::Rng rng(404);
  double scale_gap = 0.0, mean_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(50);
    auto logits = random_param(m, 2, rng, 5.0);
    std::vector<int> labels;
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      labels.push_back(rng.bernoulli(0.25));
      const double p1 = 1.0 / (1.0 + std::exp(logits(i, 0) - logits(i, 1)));
      mean -= std::log(labels.back() ? p1 : 1.0 - p1);
    }
    mean /= static_cast<double>(m);
    const double w0 = rng.uniform(0.1, 5), w1 = rng.uniform(0.1, 20);
    const double k = std::exp(rng.uniform(-6, 6));
    Tape64 tape(false);
    const double base = fg::weighted_ce(tape, logits, labels, w0, w1).item();
    const double scaled = fg::weighted_ce(tape, logits, labels, k * w0, k * w1).item();
    scale_gap = std::max(scale_gap, std::fabs(base - scaled));
    mean_gap = std::max(
        mean_gap, std::fabs(fg::weighted_ce(tape, logits, labels, 1, 1).item() - mean));
  }
  return pass_if(scale_gap <= 1e-12 && mean_gap <= 1e-9,
                 "scale gap " + fmt(scale_gap) + ", unit-weight gap " + fmt(mean_gap));
}

Outcome overfit_sanity() {
  fg::SynthConfig sc;
  sc.n_docs = 1;
  sc.min_size = sc.max_size = 8;
  sc.none_prob = 0.0;
  const auto doc = fg::filter_relevant(fg::synth_corpus(sc)[0]);
  const fg::GraphSample s{doc, fg::hash_encode(doc.texts(), 64, 0)};
  fg::TrainConfig cfg;  // GCN, one layer, semi-complete, window all
  cfg.features.hash_dim = 64;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-3;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = fg::train({s}, {s}, cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double ap = *fg::evaluate(r.checkpoint, {s}).prauc;
  return pass_if(doc.size() == 8 && ap >= 0.99 && secs < 60,
                 "training-pair PRAUC " + fmt(ap) + " after 200 epochs in " +
                     fmt(secs) + " s");
}

struct SplitSamples {
  std::vector<fg::GraphSample> train, validation, test;
  std::vector<fg::Document> train_docs;
};

SplitSamples synthetic_split(std::size_t n_docs, std::size_t dim, std::uint64_t seed) {
  fg::SynthConfig sc;
  sc.n_docs = n_docs;
  sc.seed = seed;
  std::map<std::string, fg::GraphSample> by_id;
  std::vector<fg::Document> docs;
  for (const auto& d : fg::synth_corpus(sc)) {
    auto f = fg::filter_relevant(d);
    by_id.emplace(f.id, fg::GraphSample{f, fg::hash_encode(f.texts(), dim, seed)});
    docs.push_back(std::move(f));
  }
  const auto split = fg::split_dataset(docs, seed);
  SplitSamples out;
  for (const auto& id : split.train) {
    out.train.push_back(by_id.at(id));
    out.train_docs.push_back(by_id.at(id).doc);
  }
  for (const auto& id : split.validation) out.validation.push_back(by_id.at(id));
  for (const auto& id : split.test) out.test.push_back(by_id.at(id));
  return out;
}

Outcome learning_signal() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = synthetic_split(500, 64, 0);
  fg::TrainConfig cfg;
  cfg.features.hash_dim = 64;
  cfg.structure = fg::Structure::kLinear;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 30;
  cfg.gnn.layers = 1;
  const auto l1 = fg::evaluate(fg::train(data.train, data.validation, cfg).checkpoint,
                               data.test);
  cfg.gnn.layers = 0;
  const auto l0 = fg::evaluate(fg::train(data.train, data.validation, cfg).checkpoint,
                               data.test);

  std::vector<int> test_labels;
  for (const auto& s : data.test) {
    const auto c = fg::enumerate_candidates(s.doc, cfg.window);
    test_labels.insert(test_labels.end(), c.labels.begin(), c.labels.end());
  }
  const double train_ratio = fg::pooled_edge_ratio(data.train_docs, cfg.window);
  const auto weighted = fg::random_baseline(test_labels, fg::BaselineMode::kWeighted,
                                            train_ratio, cfg.seed);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = *l1.prauc >= l1.positives_ratio + 0.25 &&
                  l1.f1 >= weighted.f1 + 0.20 && *l1.prauc >= *l0.prauc && secs < 600;
  return pass_if(ok, "L1 PRAUC " + fmt(*l1.prauc) + " (ratio " +
                         fmt(l1.positives_ratio) + "), L1 F1 " + fmt(l1.f1) +
                         " vs weighted-random F1 " + fmt(weighted.f1) + ", L0 PRAUC " +
                         fmt(*l0.prauc) + ", " + fmt(secs) + " s");
}

Outcome window_ordering() {
  fg::SynthConfig sc;
  sc.n_docs = 500;
  std::vector<fg::Document> docs;
  for (const auto& d : fg::synth_corpus(sc)) docs.push_back(fg::filter_relevant(d));
  std::vector<double> ratios;
  std::vector<std::size_t> counts;
  std::string detail = "ratios";
  for (const char* w : {"3", "4", "5", "all"}) {
    const auto window = *fg::parse_window(w);
    ratios.push_back(fg::pooled_edge_ratio(docs, window));
    std::size_t c = 0;
    for (const auto& d : docs) c += fg::enumerate_candidates(d, window).size();
    counts.push_back(c);
    detail += std::string(" W") + w + "=" + fmt(ratios.back());
  }
  bool ok = true;
  for (std::size_t k = 1; k < ratios.size(); ++k) {
    ok = ok && ratios[k - 1] > ratios[k] && counts[k - 1] < counts[k];
  }
  return pass_if(ok, detail);
}

Outcome determinism() {
  const auto data = synthetic_split(40, 32, 7);
  fg::TrainConfig cfg;
  cfg.features.hash_dim = 32;
  cfg.precision = fg::Precision::kFloat64;
  cfg.epochs = 4;
  cfg.learning_rate = 1e-2;
  cfg.seed = 7;
  const auto a = fg::train(data.train, data.validation, cfg);
  const auto b = fg::train(data.train, data.validation, cfg);
  const auto ra = fg::evaluate(a.checkpoint, data.test);
  const auto rb = fg::evaluate(b.checkpoint, data.test);
  const bool same_run = a.checkpoint.params == b.checkpoint.params &&
                        *ra.prauc == *rb.prauc && ra.f1 == rb.f1 &&
                        ra.best_f1 == rb.best_f1;

  const auto path = std::filesystem::temp_directory_path() /
                    ("flowgraph_acceptance_" + std::to_string(::getpid()) + ".fgck");
  fg::save_checkpoint(a.checkpoint, path);
  const auto loaded = fg::load_checkpoint(path);
  std::filesystem::remove(path);
  const auto rl = fg::evaluate(loaded, data.test);
  const bool same_load = *rl.prauc == *ra.prauc && rl.f1 == ra.f1 &&
                         rl.best_f1 == ra.best_f1 && rl.counts.tp == ra.counts.tp &&
                         rl.counts.fp == ra.counts.fp;
  return pass_if(same_run && same_load,
                 std::string("rerun ") + (same_run ? "identical" : "differs") +
                     ", reload " + (same_load ? "identical" : "differs") +
                     " (PRAUC " + fmt(*ra.prauc) + ")");
}

Outcome ctfw_stats() {
  const char* manifest = std::getenv("FLOWGRAPH_CTFW_MANIFEST");
  if (!manifest || !*manifest) {
    return {Verdict::kSkip, "FLOWGRAPH_CTFW_MANIFEST not set; CTFW data absent"};
  }
  const auto st = fg::compute_stats(fg::cli::load_corpus(manifest));
  const bool ok = std::fabs(st.avg_node_degree - 1.88) <= 0.02 &&
                  std::fabs(st.edge_ratio - 0.07) <= 0.005 &&
                  std::fabs(st.avg_doc_size - 17.11) <= 0.5;
  return pass_if(ok, "degree " + fmt(st.avg_node_degree) + ", edge ratio " +
                         fmt(st.edge_ratio) + ", doc size " + fmt(st.avg_doc_size));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"enumeration oracle", enumeration_oracle},
      {"PRAUC oracle", prauc_oracle},
      {"loss identities", loss_identities},
      {"overfit sanity", overfit_sanity},
      {"learning signal", learning_signal},
      {"window ordering", window_ordering},
      {"determinism and checkpoint", determinism},
      {"CTFW statistics", ctfw_stats},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.verdict == Verdict::kPass   ? "PASS"
                      : o.verdict == Verdict::kSkip ? "SKIP"
                                                    : "FAIL";
    if (o.verdict == Verdict::kFail) ++failures;
    std::printf("[%s] %zu %s: %s (%.1f s)\n", tag, k + 1, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
