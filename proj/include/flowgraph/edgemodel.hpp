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

#ifndef FLOWGRAPH_EDGEMODEL_HPP_
#define FLOWGRAPH_EDGEMODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgraph/corpus.hpp"
#include "flowgraph/encoder.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/gnn.hpp"
#include "flowgraph/graphbuild.hpp"
#include "flowgraph/metrics.hpp"
#include "flowgraph/rng.hpp"
#include "flowgraph/tensor.hpp"

namespace flowgraph {

enum class Precision { kFloat32, kFloat64 };

inline std::string_view to_string(Precision p) {
  return p == Precision::kFloat64 ? "float64" : "float32";
}

inline std::optional<Precision> parse_precision(std::string_view s) {
  if (s == "float32" || s == "f32") return Precision::kFloat32;
  if (s == "float64" || s == "f64") return Precision::kFloat64;
  return std::nullopt;
}

// "balanced" derives w1/w0 from training label counts; otherwise explicit.
struct ClassWeights {
  bool balanced = true;
  double w0 = 1.0;
  double w1 = 1.0;
};

/// Inverse-frequency weights w_c = total / (2 count_c), rescaled so w0 = 1
/// (i.e. w1 = negatives / positives).
inline std::pair<double, double> balanced_class_weights(std::size_t negatives,
                                                        std::size_t positives) {
  if (negatives == 0 || positives == 0) {
    throw ValidationError("balanced class weights need both classes present (" +
                          std::to_string(negatives) + " negatives, " +
                          std::to_string(positives) + " positives)");
  }
  return {1.0, static_cast<double>(negatives) / static_cast<double>(positives)};
}

struct TrainConfig {
  int epochs = 50;
  std::size_t batch_size = 8;
  double learning_rate = 1e-5;
  double warmup_fraction = 0.1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ClassWeights class_weights;
  std::uint64_t seed = 0;
  WindowPolicy window = WindowPolicy::all();
  Structure structure = Structure::kSemiComplete;
  // Span of the semi-complete message-passing graph; defaults to `window`.
  std::optional<WindowPolicy> graph_window;
  GnnConfig gnn;
  double head_dropout = 0.4;
  bool retain_gold = true;
  Precision precision = Precision::kFloat32;
  FeatureSpec features;

  WindowPolicy structure_window() const { return graph_window.value_or(window); }

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("config: " + m); };
    if (epochs <= 0) fail("epochs must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 0.5)) {
      fail("warmup_fraction must lie in [0, 0.5]");
    }
    if (weight_decay < 0.0) fail("weight_decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      fail("betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) fail("epsilon must be positive");
    if (!class_weights.balanced &&
        !(class_weights.w0 > 0.0 && class_weights.w1 > 0.0)) {
      fail("class weights must be positive");
    }
    if (gnn.layers < 0 || gnn.layers > 2) fail("layers must be 0, 1 or 2");
    if (!(gnn.dropout >= 0.0 && gnn.dropout < 1.0) ||
        !(head_dropout >= 0.0 && head_dropout < 1.0)) {
      fail("dropout must lie in [0, 1)");
    }
    if (features.is_hash() && features.hash_dim < 8) fail("hash_dim must be >= 8");
    if (!features.is_hash()) features.directory();
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json weights;
  if (c.class_weights.balanced) {
    weights = "balanced";
  } else {
    weights = {c.class_weights.w0, c.class_weights.w1};
  }
  return {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"warmup_fraction", c.warmup_fraction},
      {"weight_decay", c.weight_decay},
      {"betas", {c.beta1, c.beta2}},
      {"epsilon", c.epsilon},
      {"class_weights", weights},
      {"seed", c.seed},
      {"window", c.window.name()},
      {"structure", std::string(to_string(c.structure))},
      {"graph_window", c.graph_window ? nlohmann::json(c.graph_window->name())
                                      : nlohmann::json(nullptr)},
      {"gnn", std::string(to_string(c.gnn.kind))},
      {"layers", c.gnn.layers},
      {"hidden1", c.gnn.hidden1},
      {"hidden2", c.gnn.hidden2},
      {"gnn_dropout", c.gnn.dropout},
      {"gat_heads1", c.gnn.gat_heads1},
      {"gat_heads2", c.gnn.gat_heads2},
      {"leaky_slope", c.gnn.leaky_slope},
      {"symmetrize", c.gnn.symmetrize},
      {"head_dropout", c.head_dropout},
      {"retain_gold", c.retain_gold},
      {"precision", std::string(to_string(c.precision))},
      {"features", c.features.source},
      {"hash_dim", c.features.hash_dim},
      {"hash_seed", c.features.hash_seed},
  };
}

/// Overlays the keys present in `j` onto `base`; absent keys keep their
/// current value. This is how config files and flags merge.
inline TrainConfig merge_config(TrainConfig c, const nlohmann::json& j) {
  try {
    auto window = [](const nlohmann::json& v) {
      const std::string s = v.is_number() ? std::to_string(v.get<int>())
                                          : v.get<std::string>();
      auto w = parse_window(s);
      if (!w) throw ValidationError("config: bad window '" + s + "'");
      return *w;
    };
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("warmup_fraction")) c.warmup_fraction = j["warmup_fraction"].get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("betas")) {
      c.beta1 = j["betas"].at(0).get<double>();
      c.beta2 = j["betas"].at(1).get<double>();
    }
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("class_weights")) {
      const auto& w = j["class_weights"];
      if (w.is_string()) {
        if (w.get<std::string>() != "balanced") {
          throw ValidationError("config: class_weights must be 'balanced' or [w0, w1]");
        }
        c.class_weights = ClassWeights{};
      } else {
        c.class_weights = {false, w.at(0).get<double>(), w.at(1).get<double>()};
      }
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("window")) c.window = window(j["window"]);
    if (j.contains("structure")) {
      auto s = parse_structure(j["structure"].get<std::string>());
      if (!s) throw ValidationError("config: bad structure");
      c.structure = *s;
    }
    if (j.contains("graph_window")) {
      if (j["graph_window"].is_null()) c.graph_window.reset();
      else c.graph_window = window(j["graph_window"]);
    }
    if (j.contains("gnn")) {
      auto k = parse_gnn_kind(j["gnn"].get<std::string>());
      if (!k) throw ValidationError("config: bad gnn kind");
      c.gnn.kind = *k;
    }
    if (j.contains("layers")) c.gnn.layers = j["layers"].get<int>();
    if (j.contains("hidden1")) c.gnn.hidden1 = j["hidden1"].get<std::size_t>();
    if (j.contains("hidden2")) c.gnn.hidden2 = j["hidden2"].get<std::size_t>();
    if (j.contains("gnn_dropout")) c.gnn.dropout = j["gnn_dropout"].get<double>();
    if (j.contains("gat_heads1")) c.gnn.gat_heads1 = j["gat_heads1"].get<std::size_t>();
    if (j.contains("gat_heads2")) c.gnn.gat_heads2 = j["gat_heads2"].get<std::size_t>();
    if (j.contains("leaky_slope")) c.gnn.leaky_slope = j["leaky_slope"].get<double>();
    if (j.contains("symmetrize")) c.gnn.symmetrize = j["symmetrize"].get<bool>();
    if (j.contains("head_dropout")) c.head_dropout = j["head_dropout"].get<double>();
    if (j.contains("retain_gold")) c.retain_gold = j["retain_gold"].get<bool>();
    if (j.contains("precision")) {
      auto p = parse_precision(j["precision"].get<std::string>());
      if (!p) throw ValidationError("config: bad precision");
      c.precision = *p;
    }
    if (j.contains("features")) c.features.source = j["features"].get<std::string>();
    if (j.contains("hash_dim")) c.features.hash_dim = j["hash_dim"].get<std::size_t>();
    if (j.contains("hash_seed")) c.features.hash_seed = j["hash_seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  return merge_config(TrainConfig{}, j);
}

/// Linear warmup from 0 to `peak` over the first `warmup` steps, then linear
/// decay to 0 at `total`. Step k is the k-th optimizer update (0-based).
class LinearWarmupSchedule {
 public:
  LinearWarmupSchedule(double peak, std::size_t total, double warmup_fraction)
      : peak_(peak),
        total_(total),
        warmup_(static_cast<std::size_t>(warmup_fraction *
                                         static_cast<double>(total))) {}

  std::size_t warmup_steps() const { return warmup_; }
  std::size_t total_steps() const { return total_; }

  double at(std::size_t step) const {
    if (step < warmup_) {
      return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
    }
    if (step >= total_) return 0.0;
    return peak_ * static_cast<double>(total_ - step) /
           static_cast<double>(total_ - warmup_);
  }

 private:
  double peak_;
  std::size_t total_;
  std::size_t warmup_;
};

/// Adam with decoupled weight decay:
///   p <- p (1 - lr wd);  m, v updated;  p <- p - lr m_hat / (sqrt(v_hat) + eps)
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Tensor<T>> params, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8, double weight_decay = 0.01)
      : params_(std::move(params)),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps),
        wd_(weight_decay) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  std::size_t steps() const { return t_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      auto vals = p.values();
      auto g = p.grad();
      for (std::size_t i = 0; i < vals.size(); ++i) {
        double w = static_cast<double>(vals[i]);
        const double gi = static_cast<double>(g[i]);
        w *= 1.0 - lr * wd_;
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * gi;
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * gi * gi;
        const double mh = m_[k][i] / bc1;
        const double vh = v_[k][i] / bc2;
        w -= lr * mh / (std::sqrt(vh) + eps_);
        vals[i] = static_cast<T>(w);
      }
    }
  }

 private:
  std::vector<Tensor<T>> params_;
  double beta1_, beta2_, eps_, wd_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Pair classifier: [h_i ; h_j] (2d) -> d -> dropout -> GELU -> 2 logits.
template <typename T>
struct PairHead {
  Tensor<T> proj1;  // 2d x d
  Tensor<T> bias1;  // 1 x d
  Tensor<T> proj2;  // d x 2
  Tensor<T> bias2;  // 1 x 2
  double dropout = 0.4;

  static PairHead init(std::size_t d_node, Rng& rng, double dropout = 0.4) {
    PairHead h{Tensor<T>::parameter(2 * d_node, d_node),
               Tensor<T>::parameter(1, d_node), Tensor<T>::parameter(d_node, 2),
               Tensor<T>::parameter(1, 2), dropout};
    glorot_uniform(h.proj1, rng);
    glorot_uniform(h.proj2, rng);
    return h;
  }

  std::size_t d_node() const { return proj1.cols(); }

  std::vector<NamedParam<T>> parameters() const {
    return {{"head.proj1", proj1},
            {"head.bias1", bias1},
            {"head.proj2", proj2},
            {"head.bias2", bias2}};
  }
};

template <typename T>
Tensor<T> pair_logits(Tape<T>& tape, const PairHead<T>& head,
                      const Tensor<T>& nodes, const std::vector<Edge>& pairs,
                      bool training, Rng& rng) {
  if (nodes.cols() != head.d_node()) {
    throw ValidationError("pair head expects " + std::to_string(head.d_node()) +
                          "-dim nodes, got " + std::to_string(nodes.cols()));
  }
  std::vector<std::size_t> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i >= nodes.rows() || j >= nodes.rows()) {
      throw ValidationError("pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range for " +
                            std::to_string(nodes.rows()) + " nodes");
    }
    src.push_back(i);
    dst.push_back(j);
  }
  auto x = concat_cols(tape, {gather_rows(tape, nodes, std::move(src)),
                              gather_rows(tape, nodes, std::move(dst))});
  auto h = add_row(tape, matmul(tape, x, head.proj1), head.bias1);
  h = dropout(tape, h, head.dropout, training, rng);
  h = gelu(tape, h);
  return add_row(tape, matmul(tape, h, head.proj2), head.bias2);
}

// Binary wrapper around weighted_cross_entropy: labels must be 0 or 1.
template <typename T>
Tensor<T> weighted_ce(Tape<T>& tape, const Tensor<T>& logits,
                      const std::vector<int>& labels, double w0, double w1) {
  if (logits.cols() != 2) {
    throw ValidationError("weighted_ce expects m x 2 logits, got " +
                          logits.shape());
  }
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw ValidationError("weighted_ce: label " + std::to_string(l) +
                            " is not 0 or 1");
    }
  }
  return weighted_cross_entropy(tape, logits, labels,
                                {static_cast<T>(w0), static_cast<T>(w1)});
}

// Features plus annotations for one document.
struct GraphSample {
  Document doc;
  EmbeddingMatrix features;
};

struct StoredParam {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // exact widening of the model's scalars

  bool operator==(const StoredParam&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  std::size_t feature_dim = 0;
  double best_val_prauc = 0.0;
  int epoch = -1;
  std::vector<StoredParam> params;
};

/// GNN stack plus pair head, instantiated at one scalar precision.
template <typename T>
class EdgeModel {
 public:
  EdgeModel(const TrainConfig& cfg, std::size_t feature_dim, Rng& rng)
      : cfg_(cfg),
        feature_dim_(feature_dim),
        stack_(cfg.gnn, feature_dim, rng),
        head_(PairHead<T>::init(stack_.d_out(), rng, cfg.head_dropout)) {}

  static EdgeModel from_checkpoint(const Checkpoint& ck) {
    Rng rng(0);
    EdgeModel m(ck.config, ck.feature_dim, rng);
    std::map<std::string, const StoredParam*> by_name;
    for (const auto& p : ck.params) by_name[p.name] = &p;
    auto params = m.parameters();
    if (params.size() != ck.params.size()) {
      throw FormatError("checkpoint holds " + std::to_string(ck.params.size()) +
                        " tensors, model expects " +
                        std::to_string(params.size()));
    }
    for (auto& np : params) {
      auto it = by_name.find(np.name);
      if (it == by_name.end()) {
        throw FormatError("checkpoint lacks parameter '" + np.name + "'");
      }
      const auto& sp = *it->second;
      if (sp.rows != np.tensor.rows() || sp.cols != np.tensor.cols()) {
        throw FormatError("checkpoint parameter '" + np.name + "' has shape " +
                          Tensor<T>::shape_string(sp.rows, sp.cols) +
                          ", model expects " + np.tensor.shape());
      }
      auto vals = np.tensor.values();
      for (std::size_t i = 0; i < vals.size(); ++i) {
        vals[i] = static_cast<T>(sp.values[i]);
      }
    }
    return m;
  }

  const TrainConfig& config() const { return cfg_; }
  std::size_t feature_dim() const { return feature_dim_; }
  const GnnStack<T>& stack() const { return stack_; }
  const PairHead<T>& head() const { return head_; }

  std::vector<NamedParam<T>> parameters() const {
    auto out = stack_.parameters();
    auto h = head_.parameters();
    out.insert(out.end(), h.begin(), h.end());
    return out;
  }

  std::vector<StoredParam> snapshot() const {
    std::vector<StoredParam> out;
    for (const auto& np : parameters()) {
      StoredParam sp{np.name, np.tensor.rows(), np.tensor.cols(), {}};
      sp.values.assign(np.tensor.values().begin(), np.tensor.values().end());
      out.push_back(std::move(sp));
    }
    return out;
  }

  FlowGraph graph_for(std::size_t n) const {
    return build_structure(n, cfg_.structure, cfg_.structure_window());
  }

  /// Logits (|pairs| x 2) for one document.
  Tensor<T> logits(Tape<T>& tape, const Tensor<T>& features,
                   const std::vector<Edge>& pairs, bool training,
                   Rng& rng) const {
    if (features.cols() != feature_dim_) {
      throw ValidationError("model expects " + std::to_string(feature_dim_) +
                            "-dim features, got " +
                            std::to_string(features.cols()));
    }
    const auto g = graph_for(features.rows());
    auto nodes = stack_.forward(tape, features, g, training, rng);
    return pair_logits(tape, head_, nodes, pairs, training, rng);
  }

  // P(edge) per pair in eval mode.
  std::vector<double> edge_probabilities(const EmbeddingMatrix& features,
                                         const std::vector<Edge>& pairs) const {
    if (pairs.empty()) return {};
    Tape<T> tape(false);
    Rng rng(0);
    auto probs =
        softmax_rows(tape, logits(tape, to_tensor<T>(features), pairs, false, rng));
    std::vector<double> out(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = probs(k, 1);
    return out;
  }

 private:
  TrainConfig cfg_;
  std::size_t feature_dim_;
  GnnStack<T> stack_;
  PairHead<T> head_;
};

// Runs `fn` with an EdgeModel<float> or EdgeModel<double> per the
// checkpoint's precision.
template <typename Fn>
decltype(auto) with_model(const Checkpoint& ck, Fn&& fn) {
  if (ck.config.precision == Precision::kFloat64) {
    const auto m = EdgeModel<double>::from_checkpoint(ck);
    return fn(m);
  }
  const auto m = EdgeModel<float>::from_checkpoint(ck);
  return fn(m);
}

inline constexpr char kCheckpointMagic[4] = {'F', 'G', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint bytes: magic FGCK, version u32, u32-length-prefixed UTF-8 JSON
/// block, then per tensor: u32 name length, name, rows u32, cols u32 and the
/// row-major values. Values are float32, or float64 when the config's
/// precision is float64, so reloads are bit-exact at either precision.
inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  nlohmann::json meta = {{"config", to_json(ck.config)},
                         {"feature_dim", ck.feature_dim},
                         {"best_val_prauc", ck.best_val_prauc},
                         {"epoch", ck.epoch}};
  const std::string text = meta.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  const bool wide = ck.config.precision == Precision::kFloat64;
  for (const auto& p : ck.params) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    detail::put_u32(out, static_cast<std::uint32_t>(p.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(p.cols));
    for (double v : p.values) {
      if (wide) detail::put_f64(out, v);
      else detail::put_f32(out, static_cast<float>(v));
    }
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes,
                                    const std::string& context) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError(context + ": bad magic, not a checkpoint");
  }
  detail::ByteReader r(bytes, context);
  r.bytes(4);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(context + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  Checkpoint ck;
  const auto len = r.u32();
  try {
    const auto meta = nlohmann::json::parse(r.bytes(len));
    ck.config = config_from_json(meta.at("config"));
    ck.feature_dim = meta.at("feature_dim").get<std::size_t>();
    ck.best_val_prauc = meta.at("best_val_prauc").get<double>();
    ck.epoch = meta.at("epoch").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(context + ": malformed config block: " + e.what());
  }
  const bool wide = ck.config.precision == Precision::kFloat64;
  while (r.remaining() > 0) {
    StoredParam p;
    p.name = std::string(r.bytes(r.u32()));
    p.rows = r.u32();
    p.cols = r.u32();
    p.values.resize(p.rows * p.cols);
    for (auto& v : p.values) v = wide ? r.f64() : static_cast<double>(r.f32());
    ck.params.push_back(std::move(p));
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck,
                            const std::filesystem::path& path) {
  detail::write_file_synced(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_prauc = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> history;
  double w0 = 1.0;
  double w1 = 1.0;
};

namespace detail {

struct PooledScores {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>
      doc_ranges;  // id -> [begin, end) into scores
};

template <typename T>
PooledScores score_samples(const EdgeModel<T>& model,
                           const std::vector<GraphSample>& samples,
                           bool retain_gold) {
  PooledScores out;
  for (const auto& s : samples) {
    const auto c = enumerate_candidates(s.doc, model.config().window, retain_gold);
    const auto p = model.edge_probabilities(s.features, c.pairs);
    const std::size_t begin = out.scores.size();
    out.scores.insert(out.scores.end(), p.begin(), p.end());
    out.labels.insert(out.labels.end(), c.labels.begin(), c.labels.end());
    out.doc_ranges.push_back({s.doc.id, {begin, out.scores.size()}});
  }
  return out;
}

inline void check_samples(const std::vector<GraphSample>& samples,
                          const char* what) {
  for (const auto& s : samples) {
    if (s.features.rows != s.doc.size()) {
      throw ValidationError(std::string(what) + " document '" + s.doc.id +
                            "' has " + std::to_string(s.doc.size()) +
                            " sentences but " +
                            std::to_string(s.features.rows) + " feature rows");
    }
    if (s.doc.size() < 2) {
      throw ValidationError(std::string(what) + " document '" + s.doc.id +
                            "' has fewer than 2 sentences");
    }
  }
}

template <typename T>
TrainResult train_impl(const std::vector<GraphSample>& train,
                       const std::vector<GraphSample>& val,
                       const TrainConfig& cfg,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  Rng init_rng(detail::splitmix64(cfg.seed));
  Rng run_rng(detail::splitmix64(cfg.seed ^ 0x5DEECE66Dull));
  const std::size_t d = train.front().features.cols;
  for (const auto& s : train) {
    if (s.features.cols != d) {
      throw ValidationError("training features mix dimensions " +
                            std::to_string(d) + " and " +
                            std::to_string(s.features.cols));
    }
  }
  for (const auto& s : val) {
    if (s.features.cols != d) {
      throw ValidationError("validation features have dimension " +
                            std::to_string(s.features.cols) + ", training " +
                            std::to_string(d));
    }
  }
  EdgeModel<T> model(cfg, d, init_rng);

  struct Item {
    const GraphSample* sample;
    Tensor<T> x;
    CandidateSet cand;
  };
  std::vector<Item> items;
  std::size_t pos = 0, neg = 0;
  for (const auto& s : train) {
    Item it{&s, to_tensor<T>(s.features),
            enumerate_candidates(s.doc, cfg.window, cfg.retain_gold)};
    pos += it.cand.positives();
    neg += it.cand.size() - it.cand.positives();
    items.push_back(std::move(it));
  }
  auto [w0, w1] = cfg.class_weights.balanced
                      ? balanced_class_weights(neg, pos)
                      : std::pair{cfg.class_weights.w0, cfg.class_weights.w1};

  std::vector<Tensor<T>> param_tensors;
  for (const auto& np : model.parameters()) param_tensors.push_back(np.tensor);
  AdamW<T> opt(param_tensors, cfg.beta1, cfg.beta2, cfg.epsilon,
               cfg.weight_decay);
  const std::size_t batches =
      (items.size() + cfg.batch_size - 1) / cfg.batch_size;
  LinearWarmupSchedule sched(cfg.learning_rate,
                             batches * static_cast<std::size_t>(cfg.epochs),
                             cfg.warmup_fraction);

  TrainResult result;
  result.w0 = w0;
  result.w1 = w1;
  bool have_best = false;
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    run_rng.shuffle(order);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      Tape<T> tape;
      std::vector<Tensor<T>> logits;
      std::vector<int> labels;
      const std::size_t end = std::min(order.size(), (b + 1) * cfg.batch_size);
      for (std::size_t k = b * cfg.batch_size; k < end; ++k) {
        const auto& it = items[order[k]];
        logits.push_back(model.logits(tape, it.x, it.cand.pairs, true, run_rng));
        labels.insert(labels.end(), it.cand.labels.begin(), it.cand.labels.end());
      }
      auto batch_logits =
          logits.size() == 1 ? logits[0] : concat_rows(tape, logits);
      auto loss = weighted_ce(tape, batch_logits, labels, w0, w1);
      if (!std::isfinite(static_cast<double>(loss.item()))) {
        std::string ids;
        for (std::size_t k = b * cfg.batch_size; k < end; ++k) {
          ids += (ids.empty() ? "" : ", ") + items[order[k]].sample->doc.id;
        }
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b) + " (documents: " +
                           ids + ")");
      }
      opt.zero_grad();
      tape.backward(loss);
      lr = sched.at(opt.steps());
      opt.step(lr);
      loss_sum += static_cast<double>(loss.item());
    }
    const auto pooled = score_samples(model, val, cfg.retain_gold);
    const double val_prauc = prauc(pooled.scores, pooled.labels).average_precision;
    EpochLog log{epoch, loss_sum / static_cast<double>(batches), val_prauc, lr};
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (!have_best || val_prauc > result.checkpoint.best_val_prauc) {
      have_best = true;
      result.checkpoint.best_val_prauc = val_prauc;
      result.checkpoint.epoch = epoch;
      result.checkpoint.params = model.snapshot();
    }
  }
  result.checkpoint.config = cfg;
  result.checkpoint.feature_dim = d;
  return result;
}

}  // namespace detail

/// Trains the edge classifier on whole-graph mini-batches with AdamW and a
/// linear warmup/decay schedule, keeping the parameters of the epoch with
/// the best validation PRAUC (earliest on ties). Deterministic per seed.
inline TrainResult train(const std::vector<GraphSample>& train_set,
                         const std::vector<GraphSample>& val_set,
                         const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("training split is empty");
  if (val_set.empty()) throw ValidationError("validation split is empty");
  detail::check_samples(train_set, "training");
  detail::check_samples(val_set, "validation");
  if (cfg.precision == Precision::kFloat64) {
    return detail::train_impl<double>(train_set, val_set, cfg, on_epoch);
  }
  return detail::train_impl<float>(train_set, val_set, cfg, on_epoch);
}

struct Prediction {
  std::string doc_id;
  EdgeSet edges;
  std::vector<Edge> pairs;
  std::vector<double> probabilities;
};

/// Scores every in-window pair (gold is unknown here, so nothing is
/// retained) and emits (i, j) iff P(edge) >= 0.5.
inline Prediction predict(const Checkpoint& ck, const Document& doc,
                          const EmbeddingMatrix& features) {
  if (features.cols != ck.feature_dim) {
    throw ValidationError("document '" + doc.id + "' has " +
                          std::to_string(features.cols) +
                          "-dim features, checkpoint expects " +
                          std::to_string(ck.feature_dim));
  }
  if (features.rows != doc.size()) {
    throw ValidationError("document '" + doc.id + "' has " +
                          std::to_string(doc.size()) + " sentences but " +
                          std::to_string(features.rows) + " feature rows");
  }
  Prediction p;
  p.doc_id = doc.id;
  if (doc.size() < 2) return p;
  const auto c = enumerate_candidates(doc, ck.config.window, false);
  p.pairs = c.pairs;
  p.probabilities = with_model(ck, [&](const auto& m) {
    return m.edge_probabilities(features, c.pairs);
  });
  for (std::size_t k = 0; k < p.pairs.size(); ++k) {
    if (p.probabilities[k] >= 0.5) p.edges.insert(p.pairs[k]);
  }
  return p;
}

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [i, j] : p.edges) edges.push_back({i, j});
  nlohmann::json scored = nlohmann::json::array();
  for (std::size_t k = 0; k < p.pairs.size(); ++k) {
    scored.push_back({p.pairs[k].first, p.pairs[k].second, p.probabilities[k]});
  }
  return {{"id", p.doc_id}, {"edges", edges}, {"pairs", scored}};
}

// Sentence-type classifier: a single linear layer over frozen features.
template <typename T>
struct StcHead {
  Tensor<T> weight;  // d x 5
  Tensor<T> bias;    // 1 x 5

  static StcHead init(std::size_t d, Rng& rng) {
    StcHead h{Tensor<T>::parameter(d, kNumSentenceTypes),
              Tensor<T>::parameter(1, kNumSentenceTypes)};
    glorot_uniform(h.weight, rng);
    return h;
  }

  Tensor<T> logits(Tape<T>& tape, const Tensor<T>& x) const {
    return add_row(tape, matmul(tape, x, weight), bias);
  }
};

struct StcConfig {
  int epochs = 200;
  double learning_rate = 1e-2;
  double weight_decay = 0.0;
  double warmup_fraction = 0.0;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
};

struct StcReport {
  std::vector<double> accuracy;  // one per seed
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double majority_frequency = 0.0;
  bool degenerate = false;  // only one label class in the training data
};

inline int stc_label(SentenceType t) { return static_cast<int>(t); }

/// Trains a StcHead per seed with unweighted cross entropy (full batch,
/// AdamW) and reports micro accuracy on the evaluation rows.
inline StcReport stc_train_eval(const EmbeddingMatrix& train_x,
                                const std::vector<int>& train_y,
                                const EmbeddingMatrix& eval_x,
                                const std::vector<int>& eval_y,
                                const StcConfig& cfg) {
  auto check = [](const EmbeddingMatrix& x, const std::vector<int>& y,
                  const char* what) {
    if (x.rows != y.size()) {
      throw ValidationError(std::string(what) + ": " + std::to_string(y.size()) +
                            " labels for " + std::to_string(x.rows) + " rows");
    }
    for (int l : y) {
      if (l < 0 || l >= kNumSentenceTypes) {
        throw ValidationError(std::string(what) + ": label " +
                              std::to_string(l) +
                              " is not one of the 5 sentence types");
      }
    }
  };
  check(train_x, train_y, "stc train");
  check(eval_x, eval_y, "stc eval");
  if (train_x.rows == 0 || eval_x.rows == 0) {
    throw ValidationError("stc: empty training or evaluation set");
  }
  if (train_x.cols != eval_x.cols) {
    throw ValidationError("stc: train and eval feature dimensions differ");
  }
  if (cfg.seeds.empty()) throw ValidationError("stc: no seeds given");

  StcReport rep;
  std::vector<std::size_t> counts(kNumSentenceTypes, 0);
  for (int l : train_y) ++counts[static_cast<std::size_t>(l)];
  rep.degenerate =
      std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
  rep.majority_frequency =
      static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
      static_cast<double>(train_y.size());

  const auto x = to_tensor<double>(train_x);
  const auto xe = to_tensor<double>(eval_x);
  const std::vector<double> unit(kNumSentenceTypes, 1.0);
  for (std::uint64_t seed : cfg.seeds) {
    Rng rng(detail::splitmix64(seed));
    auto head = StcHead<double>::init(train_x.cols, rng);
    AdamW<double> opt({head.weight, head.bias}, 0.9, 0.999, 1e-8,
                      cfg.weight_decay);
    LinearWarmupSchedule sched(cfg.learning_rate,
                               static_cast<std::size_t>(cfg.epochs),
                               cfg.warmup_fraction);
    for (int e = 0; e < cfg.epochs; ++e) {
      Tape<double> tape;
      auto loss = weighted_cross_entropy(tape, head.logits(tape, x), train_y, unit);
      opt.zero_grad();
      tape.backward(loss);
      opt.step(cfg.warmup_fraction > 0.0 ? sched.at(opt.steps())
                                         : cfg.learning_rate);
    }
    Tape<double> tape(false);
    const auto out = head.logits(tape, xe);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < eval_y.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < kNumSentenceTypes; ++k) {
        if (out(i, k) > out(i, best)) best = k;
      }
      correct += static_cast<int>(best) == eval_y[i];
    }
    rep.accuracy.push_back(static_cast<double>(correct) /
                           static_cast<double>(eval_y.size()));
  }
  double mean = 0.0;
  for (double a : rep.accuracy) mean += a;
  mean /= static_cast<double>(rep.accuracy.size());
  double var = 0.0;
  for (double a : rep.accuracy) var += (a - mean) * (a - mean);
  rep.mean_accuracy = mean;
  rep.std_accuracy = std::sqrt(var / static_cast<double>(rep.accuracy.size()));
  return rep;
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_EDGEMODEL_HPP_
