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

#ifndef FLOWGRAPH_EVAL_HPP_
#define FLOWGRAPH_EVAL_HPP_

#include <string>
#include <vector>

#include "flowgraph/edgemodel.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/metrics.hpp"

namespace flowgraph {

struct EvaluateOptions {
  double threshold = 0.5;
  bool per_document = false;
};

/// Scores every candidate pair of every document (with out-of-window gold
/// retention when the checkpoint's config asks for it) and reports pooled
/// PRAUC and F1.
inline EvalReport evaluate(const Checkpoint& ck,
                           const std::vector<GraphSample>& samples,
                           const EvaluateOptions& opts = {}) {
  if (samples.empty()) throw ValidationError("cannot evaluate an empty split");
  for (const auto& s : samples) {
    if (s.features.cols != ck.feature_dim) {
      throw ValidationError("document '" + s.doc.id + "' has " +
                            std::to_string(s.features.cols) +
                            "-dim features, checkpoint expects " +
                            std::to_string(ck.feature_dim));
    }
  }
  detail::check_samples(samples, "evaluation");
  const auto pooled = with_model(ck, [&](const auto& m) {
    return detail::score_samples(m, samples, ck.config.retain_gold);
  });
  auto report = report_from_scores(pooled.scores, pooled.labels, opts.threshold);
  report.documents = samples.size();
  if (opts.per_document) {
    for (const auto& [id, range] : pooled.doc_ranges) {
      std::span<const double> s(pooled.scores.data() + range.first,
                                range.second - range.first);
      std::span<const int> l(pooled.labels.data() + range.first,
                             range.second - range.first);
      if (std::count(l.begin(), l.end(), 1) == 0) continue;
      report.per_document_prauc.emplace_back(id, prauc(s, l).average_precision);
    }
  }
  return report;
}

// Edge ratio of the pooled candidates of a set of documents.
inline double pooled_edge_ratio(const std::vector<Document>& docs,
                                WindowPolicy window, bool retain_gold = true) {
  std::size_t pos = 0, total = 0;
  for (const auto& d : docs) {
    if (d.size() < 2) continue;
    const auto c = enumerate_candidates(d, window, retain_gold);
    pos += c.positives();
    total += c.size();
  }
  if (total == 0) throw ValidationError("no candidate pairs to take a ratio of");
  return static_cast<double>(pos) / static_cast<double>(total);
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_EVAL_HPP_
