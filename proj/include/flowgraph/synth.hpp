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

#ifndef FLOWGRAPH_SYNTH_HPP_
#define FLOWGRAPH_SYNTH_HPP_

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgraph/corpus.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/rng.hpp"

namespace flowgraph {

/// Knobs of the synthetic corpus generator. The defaults are calibrated so
/// that 500 documents of 6-14 relevant sentences average a node degree of
/// about 1.88.
struct SynthConfig {
  std::size_t n_docs = 100;
  std::size_t min_size = 6;   // relevant sentences per document
  std::size_t max_size = 14;
  std::uint64_t seed = 0;
  double backbone_keep = 0.92;  // P(i -> i+1 is gold)
  double skip_prob = 0.18;      // P(sentence i gets one extra forward edge)
  std::size_t max_skip = 5;     // skip edges span 2..max_skip
  std::size_t rare_vocab = 10000;
  std::size_t filler_min = 4;
  std::size_t filler_max = 8;
  double none_prob = 0.1;  // chance of an irrelevant sentence after each one

  void validate() const {
    if (min_size < 2) throw ValidationError("synth: minimum size must be >= 2");
    if (max_size < min_size) {
      throw ValidationError("synth: size range max < min");
    }
    if (n_docs == 0) throw ValidationError("synth: need at least one document");
    if (max_skip < 2) throw ValidationError("synth: max_skip must be >= 2");
    if (filler_max < filler_min) {
      throw ValidationError("synth: filler range max < min");
    }
    if (rare_vocab < 64) throw ValidationError("synth: rare vocabulary too small");
  }
};

namespace detail {

inline constexpr std::array<std::string_view, 64> kFillerWords = {
    "the",     "a",       "we",      "then",    "it",      "run",
    "open",    "binary",  "script",  "server",  "file",    "check",
    "send",    "read",    "value",   "string",  "output",  "input",
    "use",     "find",    "get",     "set",     "call",    "function",
    "address", "buffer",  "payload", "key",     "data",    "page",
    "request", "response", "user",   "login",   "port",    "shell",
    "command", "memory",  "offset",  "stack",   "heap",    "library",
    "program", "source",  "code",    "test",    "result",  "next",
    "first",   "after",   "with",    "from",    "into",    "by",
    "on",      "for",     "this",    "that",    "which",   "our",
    "simple",  "small",   "again",   "now"};

// Pronounceable-ish rare token for vocabulary slot k, e.g. "zorvak".
inline std::string rare_token(std::size_t k) {
  static constexpr std::string_view kOnset = "bdfgklmnprstvz";
  static constexpr std::string_view kVowel = "aeiou";
  std::string out;
  std::size_t v = k + 1;
  while (v > 0) {
    out += kOnset[v % kOnset.size()];
    v /= kOnset.size();
    out += kVowel[v % kVowel.size()];
    v /= kVowel.size();
  }
  return out + "x";
}

}  // namespace detail

/// Generates an annotated document: a forward gold graph over the relevant
/// sentences (mostly-linear backbone plus skip edges) where each gold edge
/// plants one shared rare token in both endpoints, interleaved with NONE
/// sentences that carry neither edges nor rare tokens.
inline Document synth_document(const std::string& id, const SynthConfig& cfg,
                               Rng& rng) {
  const auto n = static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(cfg.min_size),
                  static_cast<std::int64_t>(cfg.max_size)));
  EdgeSet edges;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (rng.bernoulli(cfg.backbone_keep)) edges.emplace(i, i + 1);
  }
  for (std::size_t i = 0; i + 2 < n; ++i) {
    if (!rng.bernoulli(cfg.skip_prob)) continue;
    const auto k = static_cast<std::size_t>(
        rng.between(2, static_cast<std::int64_t>(cfg.max_skip)));
    if (i + k < n) edges.emplace(i, i + k);
  }

  std::vector<std::vector<std::string>> tokens(n);
  std::set<std::size_t> used;
  for (const auto& [i, j] : edges) {
    std::size_t r;
    do {
      r = rng.below(cfg.rare_vocab);
    } while (!used.insert(r).second);
    const auto tok = detail::rare_token(r);
    tokens[i].push_back(tok);
    tokens[j].push_back(tok);
  }
  auto sentence = [&](std::vector<std::string> words) {
    const auto fillers =
        rng.between(static_cast<std::int64_t>(cfg.filler_min),
                    static_cast<std::int64_t>(cfg.filler_max));
    for (std::int64_t f = 0; f < fillers; ++f) {
      words.emplace_back(
          detail::kFillerWords[rng.below(detail::kFillerWords.size())]);
    }
    rng.shuffle(words);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    return text + ".";
  };

  static constexpr std::array<SentenceType, 4> kTypes = {
      SentenceType::kAction, SentenceType::kInformation, SentenceType::kBoth,
      SentenceType::kCode};
  Document doc;
  doc.id = id;
  std::vector<std::size_t> position(n);
  for (std::size_t i = 0; i < n; ++i) {
    position[i] = doc.sentences.size();
    doc.sentences.push_back(
        {doc.sentences.size(), sentence(tokens[i]), kTypes[rng.below(4)]});
    if (i + 1 < n && rng.bernoulli(cfg.none_prob)) {
      doc.sentences.push_back(
          {doc.sentences.size(), sentence({}), SentenceType::kNone});
    }
  }
  for (const auto& [i, j] : edges) {
    doc.gold_edges.emplace(position[i], position[j]);
  }
  return doc;
}

inline std::vector<Document> synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<Document> docs;
  const std::size_t width = std::to_string(cfg.n_docs - 1).size();
  for (std::size_t k = 0; k < cfg.n_docs; ++k) {
    std::string num = std::to_string(k);
    num.insert(0, width - num.size(), '0');
    docs.push_back(synth_document("synth-" + num, cfg, rng));
  }
  return docs;
}

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_docs", c.n_docs},         {"min_size", c.min_size},
          {"max_size", c.max_size},     {"seed", c.seed},
          {"backbone_keep", c.backbone_keep}, {"skip_prob", c.skip_prob},
          {"max_skip", c.max_skip},     {"rare_vocab", c.rare_vocab},
          {"filler_min", c.filler_min}, {"filler_max", c.filler_max},
          {"none_prob", c.none_prob}};
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_SYNTH_HPP_
