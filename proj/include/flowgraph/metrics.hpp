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

#ifndef FLOWGRAPH_METRICS_HPP_
#define FLOWGRAPH_METRICS_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgraph/error.hpp"
#include "flowgraph/graphbuild.hpp"
#include "flowgraph/rng.hpp"

namespace flowgraph {

struct CurvePoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve {
  double average_precision = 0.0;
  std::vector<CurvePoint> points;  // recall non-decreasing
};

namespace detail {

inline void check_scores(std::span<const double> scores,
                         std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("metrics: " + std::to_string(scores.size()) +
                          " scores for " + std::to_string(labels.size()) +
                          " labels");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw ValidationError("metrics: label " + std::to_string(l) +
                            " is not 0 or 1");
    }
  }
}

}  // namespace detail

/// Area under the precision-recall curve as step-wise average precision.
///
/// Scores are swept from high to low; pairs with exactly equal scores form a
/// single threshold step. AP = sum over steps of (recall gain) x (precision
/// at that step). No interpolation.
inline PrCurve prauc(std::span<const double> scores,
                     std::span<const int> labels) {
  detail::check_scores(scores, labels);
  const std::size_t positives =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) {
    throw ValidationError("PRAUC undefined: no positive labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  PrCurve curve;
  std::size_t tp = 0, fp = 0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      labels[order[k]] == 1 ? ++tp : ++fp;
      ++k;
    }
    const double recall = static_cast<double>(tp) / positives;
    const double precision = static_cast<double>(tp) / (tp + fp);
    curve.average_precision += (recall - prev_recall) * precision;
    curve.points.push_back({s, recall, precision});
    prev_recall = recall;
  }
  return curve;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion counts;
};

inline double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

inline F1Result f1_from_counts(const Confusion& c) {
  F1Result r;
  r.counts = c;
  r.precision = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  r.recall = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  r.f1 = safe_div(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

// Predict positive iff score >= threshold. 0/0 ratios are reported as 0.
inline F1Result f1_at_threshold(std::span<const double> scores,
                                std::span<const int> labels,
                                double threshold = 0.5) {
  detail::check_scores(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++c.tp;
    else if (pred) ++c.fp;
    else if (labels[i] == 1) ++c.fn;
    else ++c.tn;
  }
  return f1_from_counts(c);
}

// Best F1 over every threshold step of the curve.
inline std::pair<F1Result, double> best_f1(std::span<const double> scores,
                                           std::span<const int> labels) {
  const auto curve = prauc(scores, labels);
  F1Result best;
  double best_thr = curve.points.empty() ? 0.5 : curve.points.front().threshold;
  for (const auto& p : curve.points) {
    const auto r = f1_at_threshold(scores, labels, p.threshold);
    if (r.f1 > best.f1) {
      best = r;
      best_thr = p.threshold;
    }
  }
  return {best, best_thr};
}

struct EvalReport {
  std::optional<double> prauc;  // absent for baselines without scores
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  Confusion counts;
  double positives_ratio = 0.0;
  std::optional<double> best_f1;
  std::optional<double> best_f1_threshold;
  std::vector<CurvePoint> curve;
  std::size_t pairs = 0;
  std::size_t documents = 0;
  // Macro view: one entry per document with at least one positive.
  std::vector<std::pair<std::string, double>> per_document_prauc;
};

/// Full report from pooled scores: PRAUC, curve, F1 at `threshold` and the
/// best F1 along the curve.
inline EvalReport report_from_scores(std::span<const double> scores,
                                     std::span<const int> labels,
                                     double threshold = 0.5) {
  EvalReport r;
  const auto curve = prauc(scores, labels);
  r.prauc = curve.average_precision;
  r.curve = curve.points;
  const auto f = f1_at_threshold(scores, labels, threshold);
  r.f1 = f.f1;
  r.precision = f.precision;
  r.recall = f.recall;
  r.counts = f.counts;
  const auto [bf, thr] = best_f1(scores, labels);
  r.best_f1 = bf.f1;
  r.best_f1_threshold = thr;
  r.pairs = scores.size();
  r.positives_ratio =
      static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
      static_cast<double>(labels.size());
  return r;
}

enum class BaselineMode { kUniform, kWeighted };

/// Coin-flip baselines: Uniform predicts an edge with probability 0.5,
/// Weighted with the training-set edge ratio. Only F1 is meaningful since
/// there are no scores to rank.
inline EvalReport random_baseline(std::span<const int> labels,
                                  BaselineMode mode, double train_ratio,
                                  std::uint64_t seed) {
  if (mode == BaselineMode::kWeighted &&
      !(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ValidationError("weighted random baseline needs a train edge ratio "
                          "in (0, 1), got " + std::to_string(train_ratio));
  }
  const double p = mode == BaselineMode::kUniform ? 0.5 : train_ratio;
  Rng rng(seed);
  std::vector<double> pred(labels.size());
  for (auto& v : pred) v = rng.bernoulli(p) ? 1.0 : 0.0;
  const auto f = f1_at_threshold(pred, labels, 0.5);
  EvalReport r;
  r.f1 = f.f1;
  r.precision = f.precision;
  r.recall = f.recall;
  r.counts = f.counts;
  r.pairs = labels.size();
  if (!labels.empty()) {
    r.positives_ratio =
        static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
        static_cast<double>(labels.size());
  }
  return r;
}

inline EvalReport random_baseline(const CandidateSet& c, BaselineMode mode,
                                  double train_ratio, std::uint64_t seed) {
  return random_baseline(std::span<const int>(c.labels), mode, train_ratio,
                         seed);
}

inline nlohmann::json to_json(const EvalReport& r, bool include_curve = false) {
  nlohmann::json j = {
      {"f1", r.f1},
      {"precision", r.precision},
      {"recall", r.recall},
      {"counts",
       {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}},
      {"positives_ratio", r.positives_ratio},
      {"pairs", r.pairs},
      {"documents", r.documents}};
  j["prauc"] = r.prauc ? nlohmann::json(*r.prauc) : nlohmann::json(nullptr);
  if (r.best_f1) j["best_f1"] = *r.best_f1;
  if (r.best_f1_threshold) j["best_f1_threshold"] = *r.best_f1_threshold;
  if (include_curve) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : r.curve) {
      pts.push_back({{"threshold", p.threshold},
                     {"recall", p.recall},
                     {"precision", p.precision}});
    }
    j["curve"] = pts;
  }
  if (!r.per_document_prauc.empty()) {
    nlohmann::json per = nlohmann::json::object();
    double total = 0.0;
    for (const auto& [id, v] : r.per_document_prauc) {
      per[id] = v;
      total += v;
    }
    j["per_document_prauc"] = per;
    j["macro_prauc"] = total / static_cast<double>(r.per_document_prauc.size());
  }
  return j;
}

inline std::string curve_csv(const EvalReport& r) {
  std::string out = "threshold,recall,precision\n";
  char buf[96];
  for (const auto& p : r.curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold,
                  p.recall, p.precision);
    out += buf;
  }
  return out;
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_METRICS_HPP_
