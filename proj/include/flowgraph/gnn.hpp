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

#ifndef FLOWGRAPH_GNN_HPP_
#define FLOWGRAPH_GNN_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowgraph/encoder.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/graphbuild.hpp"
#include "flowgraph/rng.hpp"
#include "flowgraph/tensor.hpp"

namespace flowgraph {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

enum class GnnKind { kNone, kGcn, kGat };

inline std::string_view to_string(GnnKind k) {
  switch (k) {
    case GnnKind::kNone: return "none";
    case GnnKind::kGcn: return "gcn";
    case GnnKind::kGat: return "gat";
  }
  return "none";
}

inline std::optional<GnnKind> parse_gnn_kind(std::string_view s) {
  if (s == "none") return GnnKind::kNone;
  if (s == "gcn") return GnnKind::kGcn;
  if (s == "gat") return GnnKind::kGat;
  return std::nullopt;
}

// Neighborhood used for aggregation: in-neighbors plus self, or all
// neighbors plus self when symmetrized.
inline std::vector<std::size_t> aggregation_neighbors(const FlowGraph& g,
                                                      std::size_t v,
                                                      bool symmetrize) {
  std::vector<std::size_t> out = g.in_neighbors(v);
  if (symmetrize) {
    const auto& o = g.out_neighbors(v);
    out.insert(out.end(), o.begin(), o.end());
  }
  out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

/// Degree-normalised propagation matrix P with
///   P(i, j) = 1 / sqrt(d(i) d(j))  for j in N(i) + {i},
/// where d(v) = 1 + |N(v)| counts the self-loop.
template <typename T>
Tensor<T> gcn_propagation(const FlowGraph& g, bool symmetrize = false) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<T> deg(n);
  for (std::size_t v = 0; v < n; ++v) {
    nbrs[v] = aggregation_neighbors(g, v, symmetrize);
    deg[v] = static_cast<T>(nbrs[v].size());
  }
  auto p = Tensor<T>::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : nbrs[i]) p(i, j) = T(1) / std::sqrt(deg[i] * deg[j]);
  }
  return p;
}

template <typename T>
struct GcnLayer {
  Tensor<T> theta;  // d_in x d_out
  Tensor<T> bias;   // 1 x d_out

  static GcnLayer init(std::size_t d_in, std::size_t d_out, Rng& rng) {
    GcnLayer l{Tensor<T>::parameter(d_in, d_out), Tensor<T>::parameter(1, d_out)};
    glorot_uniform(l.theta, rng);
    return l;
  }

  std::size_t d_in() const { return theta.rows(); }
  std::size_t d_out() const { return theta.cols(); }

  std::vector<NamedParam<T>> parameters(const std::string& prefix) const {
    return {{prefix + ".theta", theta}, {prefix + ".bias", bias}};
  }
};

/// Graph convolution: H' = P (H Theta) + bias, P from gcn_propagation.
template <typename T>
Tensor<T> gcn_forward(Tape<T>& tape, const GcnLayer<T>& layer,
                      const Tensor<T>& h, const FlowGraph& g,
                      bool symmetrize = false) {
  if (h.rows() != g.size()) {
    throw ValidationError("gcn_forward: " + std::to_string(h.rows()) +
                          " feature rows for a graph of " +
                          std::to_string(g.size()) + " nodes");
  }
  const auto p = gcn_propagation<T>(g, symmetrize);
  return add_row(tape, matmul(tape, p, matmul(tape, h, layer.theta)),
                 layer.bias);
}

template <typename T>
struct GatHead {
  Tensor<T> theta;      // d_in x d_head
  Tensor<T> attention;  // 2 d_head x 1; first half scores the target node
};

template <typename T>
struct GatLayer {
  std::vector<GatHead<T>> heads;
  Tensor<T> bias;  // 1 x d_out
  T slope = T(0.2);
  bool concat = true;  // false averages the heads

  static GatLayer init(std::size_t d_in, std::size_t d_out, std::size_t n_heads,
                       bool concat, Rng& rng, T slope = T(0.2)) {
    if (n_heads == 0) throw ValidationError("GAT layer needs at least one head");
    if (concat && d_out % n_heads != 0) {
      throw ValidationError("GAT output width " + std::to_string(d_out) +
                            " is not divisible by " + std::to_string(n_heads) +
                            " heads");
    }
    const std::size_t d_head = concat ? d_out / n_heads : d_out;
    GatLayer l;
    l.slope = slope;
    l.concat = concat;
    for (std::size_t k = 0; k < n_heads; ++k) {
      GatHead<T> h{Tensor<T>::parameter(d_in, d_head),
                   Tensor<T>::parameter(2 * d_head, 1)};
      glorot_uniform(h.theta, rng);
      glorot_uniform(h.attention, rng);
      l.heads.push_back(std::move(h));
    }
    l.bias = Tensor<T>::parameter(1, d_out);
    return l;
  }

  std::size_t d_head() const { return heads.at(0).theta.cols(); }
  std::size_t d_in() const { return heads.at(0).theta.rows(); }
  std::size_t d_out() const { return bias.cols(); }

  std::vector<NamedParam<T>> parameters(const std::string& prefix) const {
    std::vector<NamedParam<T>> out;
    for (std::size_t k = 0; k < heads.size(); ++k) {
      const std::string p = prefix + ".head" + std::to_string(k);
      out.push_back({p + ".theta", heads[k].theta});
      out.push_back({p + ".attention", heads[k].attention});
    }
    out.push_back({prefix + ".bias", bias});
    return out;
  }
};

template <typename T>
struct GatOutput {
  Tensor<T> h;
  std::vector<Tensor<T>> attention;  // one n x n matrix per head, rows = targets
};

/// Multi-head graph attention. Per head, with z = H Theta:
///   e(i, j) = LeakyReLU(a_tgt . z_i + a_src . z_j),  j in N(i) + {i}
///   alpha(i, .) = softmax of e(i, .) over that set
///   h'_i = sum_j alpha(i, j) z_j
/// Heads are concatenated (or averaged) and the bias added.
template <typename T>
GatOutput<T> gat_forward_with_attention(Tape<T>& tape, const GatLayer<T>& layer,
                                        const Tensor<T>& h, const FlowGraph& g,
                                        bool symmetrize = false) {
  if (h.rows() != g.size()) {
    throw ValidationError("gat_forward: " + std::to_string(h.rows()) +
                          " feature rows for a graph of " +
                          std::to_string(g.size()) + " nodes");
  }
  const std::size_t n = g.size();
  std::vector<char> mask(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : aggregation_neighbors(g, i, symmetrize)) {
      mask[i * n + j] = 1;
    }
  }
  GatOutput<T> out;
  std::vector<Tensor<T>> per_head;
  const std::size_t dh = layer.d_head();
  for (const auto& head : layer.heads) {
    auto z = matmul(tape, h, head.theta);
    auto a_tgt = slice_rows(tape, head.attention, 0, dh);
    auto a_src = slice_rows(tape, head.attention, dh, 2 * dh);
    auto logits = leaky_relu(
        tape, pairwise_sum(tape, matmul(tape, z, a_tgt), matmul(tape, z, a_src)),
        layer.slope);
    auto alpha = masked_softmax_rows(tape, logits, mask);
    per_head.push_back(matmul(tape, alpha, z));
    out.attention.push_back(alpha);
  }
  Tensor<T> combined;
  if (per_head.size() == 1) {
    combined = per_head[0];
  } else if (layer.concat) {
    combined = concat_cols(tape, per_head);
  } else {
    combined = per_head[0];
    for (std::size_t k = 1; k < per_head.size(); ++k) {
      combined = add(tape, combined, per_head[k]);
    }
    combined = scale(tape, combined, T(1) / static_cast<T>(per_head.size()));
  }
  out.h = add_row(tape, combined, layer.bias);
  return out;
}

template <typename T>
Tensor<T> gat_forward(Tape<T>& tape, const GatLayer<T>& layer,
                      const Tensor<T>& h, const FlowGraph& g,
                      bool symmetrize = false) {
  return gat_forward_with_attention(tape, layer, h, g, symmetrize).h;
}

struct GnnConfig {
  GnnKind kind = GnnKind::kGcn;
  int layers = 1;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 64;
  double dropout = 0.4;
  std::size_t gat_heads1 = 4;
  std::size_t gat_heads2 = 1;
  double leaky_slope = 0.2;
  bool symmetrize = false;
};

/// Zero, one or two message-passing layers. Layer 1 is followed by GELU and
/// dropout, layer 2 by GELU. With zero layers (or kind none) the input
/// passes through untouched.
template <typename T>
class GnnStack {
 public:
  GnnStack() = default;

  GnnStack(const GnnConfig& cfg, std::size_t d_in, Rng& rng)
      : cfg_(cfg), d_in_(d_in) {
    if (cfg.layers < 0 || cfg.layers > 2) {
      throw ValidationError("GNN depth must be 0, 1 or 2, got " +
                            std::to_string(cfg.layers));
    }
    if (cfg.kind == GnnKind::kNone) cfg_.layers = 0;
    std::size_t in = d_in;
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::size_t out = l == 0 ? cfg.hidden1 : cfg.hidden2;
      if (cfg_.kind == GnnKind::kGcn) {
        gcn_.push_back(GcnLayer<T>::init(in, out, rng));
      } else {
        const std::size_t heads = l == 0 ? cfg.gat_heads1 : cfg.gat_heads2;
        gat_.push_back(GatLayer<T>::init(in, out, heads, true, rng,
                                         static_cast<T>(cfg.leaky_slope)));
      }
      in = out;
    }
  }

  const GnnConfig& config() const { return cfg_; }
  int depth() const { return cfg_.layers; }
  std::size_t d_in() const { return d_in_; }
  std::size_t d_out() const {
    if (cfg_.layers == 0) return d_in_;
    return cfg_.layers == 1 ? cfg_.hidden1 : cfg_.hidden2;
  }

  const std::vector<GcnLayer<T>>& gcn_layers() const { return gcn_; }
  const std::vector<GatLayer<T>>& gat_layers() const { return gat_; }

  std::vector<NamedParam<T>> parameters() const {
    std::vector<NamedParam<T>> out;
    for (std::size_t l = 0; l < gcn_.size(); ++l) {
      auto p = gcn_[l].parameters("gnn." + std::to_string(l));
      out.insert(out.end(), p.begin(), p.end());
    }
    for (std::size_t l = 0; l < gat_.size(); ++l) {
      auto p = gat_[l].parameters("gnn." + std::to_string(l));
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x, const FlowGraph& g,
                    bool training, Rng& rng) const {
    if (x.cols() != d_in_) {
      throw ValidationError("GNN stack expects " + std::to_string(d_in_) +
                            "-dim features, got " + std::to_string(x.cols()));
    }
    if (x.rows() != g.size()) {
      throw ValidationError("GNN stack: " + std::to_string(x.rows()) +
                            " feature rows for a graph of " +
                            std::to_string(g.size()) + " nodes");
    }
    Tensor<T> h = x;
    for (int l = 0; l < cfg_.layers; ++l) {
      h = cfg_.kind == GnnKind::kGcn
              ? gcn_forward(tape, gcn_[l], h, g, cfg_.symmetrize)
              : gat_forward(tape, gat_[l], h, g, cfg_.symmetrize);
      h = gelu(tape, h);
      if (l == 0) h = dropout(tape, h, cfg_.dropout, training, rng);
    }
    return h;
  }

 private:
  GnnConfig cfg_;
  std::size_t d_in_ = 0;
  std::vector<GcnLayer<T>> gcn_;
  std::vector<GatLayer<T>> gat_;
};

template <typename T>
Tensor<T> to_tensor(const EmbeddingMatrix& m) {
  std::vector<T> v(m.values.begin(), m.values.end());
  return Tensor<T>::from(m.rows, m.cols, std::move(v));
}

template <typename T>
Tensor<T> stack_forward(Tape<T>& tape, const GnnStack<T>& stack,
                        const EmbeddingMatrix& features, const FlowGraph& g,
                        bool training, Rng& rng) {
  return stack.forward(tape, to_tensor<T>(features), g, training, rng);
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_GNN_HPP_
