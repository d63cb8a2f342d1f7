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

#ifndef FLOWGRAPH_GRAPHBUILD_HPP_
#define FLOWGRAPH_GRAPHBUILD_HPP_

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowgraph/corpus.hpp"
#include "flowgraph/error.hpp"

namespace flowgraph {

enum class Structure { kSemiComplete, kLinear };

inline std::string_view to_string(Structure s) {
  return s == Structure::kLinear ? "linear" : "semi-complete";
}

inline std::optional<Structure> parse_structure(std::string_view s) {
  if (s == "semi-complete" || s == "semicomplete" || s == "sc") {
    return Structure::kSemiComplete;
  }
  if (s == "linear" || s == "l") return Structure::kLinear;
  return std::nullopt;
}

// Forward span of a window. Windowed spans are capped at n-1 when applied to
// a document of n sentences, so W5 on three sentences behaves like Wall.
class WindowPolicy {
 public:
  static WindowPolicy all() { return WindowPolicy(0); }
  static WindowPolicy sentences(std::size_t s) {
    if (s < 1) throw ValidationError("window span must be at least 1");
    return WindowPolicy(s);
  }

  bool is_all() const { return span_ == 0; }
  std::size_t nominal_span() const { return span_; }

  std::size_t span(std::size_t n) const {
    const std::size_t cap = n > 0 ? n - 1 : 0;
    return is_all() ? cap : std::min(span_, cap);
  }

  bool contains(std::size_t i, std::size_t j, std::size_t n) const {
    return i < j && j < n && j - i <= span(n);
  }

  std::string name() const {
    return is_all() ? "all" : std::to_string(span_);
  }

  bool operator==(const WindowPolicy&) const = default;

 private:
  explicit WindowPolicy(std::size_t span) : span_(span) {}
  std::size_t span_;
};

// Accepts "all", "3", "W5", "w4".
inline std::optional<WindowPolicy> parse_window(std::string_view s) {
  if (!s.empty() && (s.front() == 'W' || s.front() == 'w')) s.remove_prefix(1);
  if (s == "all") return WindowPolicy::all();
  if (s.empty()) return std::nullopt;
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::size_t>(c - '0');
    if (v > 1000000) return std::nullopt;
  }
  if (v == 0) return std::nullopt;
  return WindowPolicy::sentences(v);
}

/// Directed document graph over sentence indices. All edges point forward.
/// In-neighbor lists are kept sorted for the message-passing layers.
class FlowGraph {
 public:
  FlowGraph() = default;
  FlowGraph(std::size_t n, const EdgeSet& edges) : n_(n), edges_(edges) {
    in_.assign(n, {});
    out_.assign(n, {});
    for (const auto& [i, j] : edges_) {
      if (j <= i) {
        throw ValidationError("flow graph edge (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") is not forward");
      }
      if (j >= n) {
        throw ValidationError("flow graph edge (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") out of range");
      }
      in_[j].push_back(i);
      out_[i].push_back(j);
    }
  }

  std::size_t size() const { return n_; }
  const EdgeSet& edges() const { return edges_; }
  const std::vector<std::size_t>& in_neighbors(std::size_t v) const {
    return in_[v];
  }
  const std::vector<std::size_t>& out_neighbors(std::size_t v) const {
    return out_[v];
  }
  std::size_t in_degree(std::size_t v) const { return in_[v].size(); }
  std::size_t out_degree(std::size_t v) const { return out_[v].size(); }
  bool has_edge(std::size_t i, std::size_t j) const {
    return edges_.count({i, j}) != 0;
  }

 private:
  std::size_t n_ = 0;
  EdgeSet edges_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> out_;
};

/// Message-passing structure for a document of n sentences: Linear chains
/// each sentence to its successor; SemiComplete links every pair within the
/// window span.
inline FlowGraph build_structure(std::size_t n, Structure structure,
                                 WindowPolicy window) {
  if (n == 0) throw ValidationError("cannot build a graph with zero nodes");
  EdgeSet edges;
  if (structure == Structure::kLinear) {
    for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace(i, i + 1);
  } else {
    const std::size_t s = window.span(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n && j - i <= s; ++j) edges.emplace(i, j);
    }
  }
  return FlowGraph(n, edges);
}

struct CandidateSet {
  std::vector<Edge> pairs;
  std::vector<int> labels;

  std::size_t size() const { return pairs.size(); }
  std::size_t positives() const {
    return static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), 1));
  }
};

/// In-window forward pairs in lexicographic order, labelled by gold
/// membership. With `retain_gold`, gold edges beyond the window are merged
/// in so every window scores the same positives.
inline CandidateSet enumerate_candidates(const Document& doc,
                                         WindowPolicy window,
                                         bool retain_gold = true) {
  const std::size_t n = doc.size();
  if (n < 2) {
    throw ValidationError("document '" + doc.id +
                          "' needs at least 2 sentences for candidate pairs");
  }
  const std::size_t s = window.span(n);
  CandidateSet c;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool gold = doc.gold_edges.count({i, j}) != 0;
      if (j - i <= s || (retain_gold && gold)) {
        c.pairs.emplace_back(i, j);
        c.labels.push_back(gold ? 1 : 0);
      }
    }
  }
  return c;
}

/// Pairs compared under a window: max(n-s, 0)*s + s(s-1)/2 with s capped at
/// n-1, and C(n, 2) for Wall (the capped formula agrees there).
inline std::size_t comparison_count(std::size_t n, WindowPolicy window) {
  if (n == 0) throw ValidationError("comparison_count needs n >= 1");
  if (window.is_all()) return n * (n - 1) / 2;
  const std::size_t s = window.span(n);
  return (n > s ? n - s : 0) * s + s * (s > 0 ? s - 1 : 0) / 2;
}

inline double edge_ratio(const CandidateSet& c) {
  if (c.size() == 0) throw ValidationError("edge ratio of an empty candidate set");
  return static_cast<double>(c.positives()) / static_cast<double>(c.size());
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_GRAPHBUILD_HPP_
