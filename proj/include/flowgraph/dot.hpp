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

#ifndef FLOWGRAPH_DOT_HPP_
#define FLOWGRAPH_DOT_HPP_

#include <optional>
#include <string>

#include "flowgraph/corpus.hpp"

namespace flowgraph {

namespace detail {

inline std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n' || c == '\r') {
      out += ' ';
      continue;
    }
    out += c;
  }
  return out;
}

// Cuts at `max_chars` code points and appends "...".
inline std::string truncate_utf8(std::string_view s, std::size_t max_chars) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (chars == max_chars) return std::string(s.substr(0, i)) + "...";
      ++chars;
    }
  }
  return std::string(s);
}

}  // namespace detail

/// Graphviz digraph for a document. With both edge sets, agreeing arcs are
/// solid black, gold-only arcs dashed grey and predicted-only arcs red.
inline std::string export_dot(const Document& doc,
                              const std::optional<EdgeSet>& gold,
                              const std::optional<EdgeSet>& predicted,
                              std::size_t label_chars = 40) {
  std::string out = "digraph \"" + detail::dot_escape(doc.id) + "\" {\n";
  out += "  rankdir=TB;\n  node [shape=box, fontsize=10];\n";
  for (const auto& s : doc.sentences) {
    out += "  s" + std::to_string(s.index) + " [label=\"S" +
           std::to_string(s.index) + " [" + std::string(to_string(s.stype)) +
           "] " + detail::dot_escape(detail::truncate_utf8(s.text, label_chars)) +
           "\"];\n";
  }
  auto arc = [&](const Edge& e, const char* attrs) {
    out += "  s" + std::to_string(e.first) + " -> s" + std::to_string(e.second);
    if (*attrs) out += std::string(" [") + attrs + "]";
    out += ";\n";
  };
  if (gold && predicted) {
    for (const auto& e : *gold) {
      if (predicted->count(e)) arc(e, "color=black, class=agree");
      else arc(e, "style=dashed, color=gray50, class=gold_only");
    }
    for (const auto& e : *predicted) {
      if (!gold->count(e)) arc(e, "color=red, class=predicted_only");
    }
  } else {
    const EdgeSet& edges = gold ? *gold : predicted ? *predicted : EdgeSet{};
    for (const auto& e : edges) arc(e, "");
  }
  out += "}\n";
  return out;
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_DOT_HPP_
