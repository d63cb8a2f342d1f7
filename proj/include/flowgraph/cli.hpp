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

#ifndef FLOWGRAPH_CLI_HPP_
#define FLOWGRAPH_CLI_HPP_

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgraph/corpus.hpp"
#include "flowgraph/dot.hpp"
#include "flowgraph/edgemodel.hpp"
#include "flowgraph/encoder.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/eval.hpp"
#include "flowgraph/metrics.hpp"
#include "flowgraph/synth.hpp"

namespace flowgraph::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kIoFailure = 2 };

// Maps a thrown library error to the documented exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return kIoFailure;
  return kValidationFailure;
}

/// One line of <out>/runs.jsonl. Appended after every command; never
/// rewritten.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double duration_s = 0.0;
  int exit_code = 0;
};

inline void append_run_manifest(const fs::path& out_dir, const RunManifest& m) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const auto path = out_dir / "runs.jsonl";
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot append to '" + path.string() + "'");
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  nlohmann::json j = {{"command", m.command},   {"config", m.config},
                      {"inputs", m.inputs},     {"seed", m.seed},
                      {"outputs", m.outputs},   {"duration_s", m.duration_s},
                      {"exit_code", m.exit_code}, {"finished_at", stamp}};
  f << j.dump() << "\n";
}

// Times a command body and appends its manifest, whatever the outcome.
class RunRecorder {
 public:
  RunRecorder(fs::path out_dir, std::string command)
      : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
  }
  RunManifest& manifest() { return manifest_; }

  int finish(int code) {
    manifest_.exit_code = code;
    manifest_.duration_s = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start_)
                               .count();
    append_run_manifest(out_dir_, manifest_);
    return code;
  }

 private:
  fs::path out_dir_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
};

// Loads a manifest entry: canonical JSON documents as-is, annotation CSVs
// parsed and filtered.
inline Document load_any_document(const ManifestEntry& e, bool drop_code) {
  if (e.path.extension() == ".json") {
    auto d = load_document_json(e.path);
    if (!e.id.empty()) d.id = e.id;
    return drop_code ? filter_relevant(d, true) : d;
  }
  auto d = load_annotation_file(e.path);
  if (!e.id.empty()) d.id = e.id;
  return filter_relevant(d, drop_code);
}

struct PrepareOptions {
  fs::path manifest;
  fs::path out_dir;
  bool drop_code = false;
};

struct PrepareResult {
  std::vector<std::string> accepted;
  std::vector<std::pair<std::string, std::string>> rejected;  // id, reason
  fs::path manifest;
};

/// Parses, filters and validates every document of a corpus manifest and
/// writes canonical JSON files plus a new manifest. Documents with fewer
/// than two relevant sentences are rejected.
inline PrepareResult prepare_corpus(const PrepareOptions& o, std::ostream& log) {
  const auto entries = load_manifest(o.manifest);
  PrepareResult r;
  std::vector<ManifestEntry> out_entries;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    try {
      if (!seen.insert(e.id).second) {
        throw ValidationError("duplicate document id");
      }
      auto doc = load_any_document(e, o.drop_code);
      validate(doc);
      if (doc.size() < 2) {
        throw ValidationError("fewer than 2 relevant sentences (single "
                              "sentence process)");
      }
      const auto path = o.out_dir / "docs" / (doc.id + ".json");
      write_file(path, to_json(doc).dump(1) + "\n");
      out_entries.push_back({doc.id, path});
      r.accepted.push_back(doc.id);
    } catch (const IoError&) {
      throw;
    } catch (const Error& err) {
      r.rejected.emplace_back(e.id, err.what());
      log << "rejected " << e.id << ": " << err.what() << "\n";
    }
  }
  r.manifest = o.out_dir / "manifest.json";
  write_manifest(r.manifest, out_entries);
  nlohmann::json rej = nlohmann::json::array();
  for (const auto& [id, why] : r.rejected) rej.push_back({{"id", id}, {"reason", why}});
  write_file(o.out_dir / "rejects.json", rej.dump(2) + "\n");
  log << "prepared " << r.accepted.size() << " documents, rejected "
      << r.rejected.size() << "\n";
  return r;
}

inline std::vector<Document> load_corpus(const fs::path& manifest,
                                         bool drop_code = false) {
  std::vector<Document> docs;
  for (const auto& e : load_manifest(manifest)) {
    docs.push_back(load_any_document(e, drop_code));
  }
  return docs;
}

inline std::vector<GraphSample> attach_features(const std::vector<Document>& docs,
                                                const FeatureSpec& spec) {
  std::vector<GraphSample> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({d, load_features(d, spec)});
  return out;
}

inline std::vector<Document> select(const std::vector<Document>& docs,
                                    const std::vector<std::string>& ids) {
  std::map<std::string, const Document*> by_id;
  for (const auto& d : docs) by_id[d.id] = &d;
  std::vector<Document> out;
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

// Named split of a corpus, reproduced from the run seed.
inline std::vector<Document> split_part(const std::vector<Document>& docs,
                                        std::uint64_t seed,
                                        const std::string& part) {
  if (part == "all") return docs;
  const auto s = split_dataset(docs, seed);
  if (part == "train") return select(docs, s.train);
  if (part == "validation") return select(docs, s.validation);
  if (part == "test") return select(docs, s.test);
  throw ValidationError("unknown split '" + part +
                        "' (train, validation, test, all)");
}

struct TrainOutcome {
  TrainResult result;
  DatasetSplit split;
  fs::path checkpoint;
};

/// Splits the prepared corpus 70:10:20 with the config seed, trains and
/// writes checkpoint.fgck, split.json and train_log.json under `out_dir`.
inline TrainOutcome train_command(const fs::path& manifest,
                                  const TrainConfig& cfg, const fs::path& out_dir,
                                  std::ostream& log) {
  cfg.validate();
  const auto docs = load_corpus(manifest);
  const auto samples = attach_features(docs, cfg.features);
  std::optional<std::size_t> dim;
  for (const auto& s : samples) {
    if (dim && *dim != s.features.cols) {
      throw ValidationError("feature dimension mismatch across documents (" +
                            std::to_string(*dim) + " vs " +
                            std::to_string(s.features.cols) + " in '" +
                            s.doc.id + "')");
    }
    dim = s.features.cols;
  }
  TrainOutcome o;
  o.split = split_dataset(docs, cfg.seed);
  std::map<std::string, const GraphSample*> by_id;
  for (const auto& s : samples) by_id[s.doc.id] = &s;
  auto gather = [&](const std::vector<std::string>& ids) {
    std::vector<GraphSample> out;
    for (const auto& id : ids) out.push_back(*by_id.at(id));
    return out;
  };
  o.result = train(gather(o.split.train), gather(o.split.validation), cfg,
                   [&](const EpochLog& e) {
                     log << "epoch " << e.epoch << " loss " << e.train_loss
                         << " val_prauc " << e.val_prauc << "\n";
                   });
  o.checkpoint = out_dir / "checkpoint.fgck";
  save_checkpoint(o.result.checkpoint, o.checkpoint);
  write_file(out_dir / "split.json",
             nlohmann::json{{"train", o.split.train},
                            {"validation", o.split.validation},
                            {"test", o.split.test}}
                     .dump(2) + "\n");
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : o.result.history) {
    hist.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"val_prauc", e.val_prauc},
                    {"learning_rate", e.learning_rate}});
  }
  write_file(out_dir / "train_log.json",
             nlohmann::json{{"history", hist},
                            {"best_epoch", o.result.checkpoint.epoch},
                            {"best_val_prauc", o.result.checkpoint.best_val_prauc},
                            {"class_weights", {o.result.w0, o.result.w1}}}
                     .dump(2) + "\n");
  log << "best validation PRAUC " << o.result.checkpoint.best_val_prauc
      << " at epoch " << o.result.checkpoint.epoch << "\n";
  return o;
}

struct EvalOptions {
  fs::path checkpoint;
  fs::path manifest;
  fs::path out_dir;
  std::string split = "test";
  bool per_doc = false;
  bool write_curve = true;
};

/// Evaluates a checkpoint on one split and writes report.json (plus the
/// curve CSV). Features are loaded and checked before any output is written.
inline nlohmann::json eval_command(const EvalOptions& o, std::ostream& log) {
  const auto ck = load_checkpoint(o.checkpoint);
  const auto docs = load_corpus(o.manifest);
  const auto part = split_part(docs, ck.config.seed, o.split);
  const auto samples = attach_features(part, ck.config.features);
  for (const auto& s : samples) {
    if (s.features.cols != ck.feature_dim) {
      throw ValidationError("document '" + s.doc.id + "' has " +
                            std::to_string(s.features.cols) +
                            "-dim features, checkpoint expects " +
                            std::to_string(ck.feature_dim));
    }
  }
  const auto report = evaluate(ck, samples, {0.5, o.per_doc});
  auto j = to_json(report, false);
  j["split"] = o.split;
  j["config"] = to_json(ck.config);
  j["config_hash"] = std::to_string(std::hash<std::string>{}(to_json(ck.config).dump()));

  // Baselines on the same candidates; the weighted one uses the train ratio.
  const auto train_docs = split_part(docs, ck.config.seed, "train");
  std::vector<int> labels;
  for (const auto& d : part) {
    const auto c = enumerate_candidates(d, ck.config.window, ck.config.retain_gold);
    labels.insert(labels.end(), c.labels.begin(), c.labels.end());
  }
  const double train_ratio =
      pooled_edge_ratio(train_docs, ck.config.window, ck.config.retain_gold);
  j["baselines"] = {
      {"random", to_json(random_baseline(labels, BaselineMode::kUniform, 0.5,
                                         ck.config.seed))},
      {"weighted_random",
       to_json(random_baseline(labels, BaselineMode::kWeighted, train_ratio,
                               ck.config.seed))},
      {"train_edge_ratio", train_ratio}};
  write_file(o.out_dir / "report.json", j.dump(2) + "\n");
  if (o.write_curve) write_file(o.out_dir / "curve.csv", curve_csv(report));
  log << "PRAUC " << *report.prauc << " F1 " << report.f1 << " (positives ratio "
      << report.positives_ratio << ", " << report.pairs << " pairs)\n";
  return j;
}

struct PredictOptions {
  fs::path checkpoint;
  fs::path manifest;
  fs::path out_dir;
  std::string split = "all";
  bool dot = false;
};

inline std::vector<Prediction> predict_command(const PredictOptions& o,
                                               std::ostream& log) {
  const auto ck = load_checkpoint(o.checkpoint);
  const auto docs = split_part(load_corpus(o.manifest), ck.config.seed, o.split);
  const auto samples = attach_features(docs, ck.config.features);
  for (const auto& s : samples) {
    if (s.features.cols != ck.feature_dim) {
      throw ValidationError("document '" + s.doc.id + "' has " +
                            std::to_string(s.features.cols) +
                            "-dim features, checkpoint expects " +
                            std::to_string(ck.feature_dim));
    }
  }
  std::vector<Prediction> out;
  for (const auto& s : samples) {
    auto p = predict(ck, s.doc, s.features);
    write_file(o.out_dir / "predictions" / (s.doc.id + ".json"),
               to_json(p).dump(1) + "\n");
    if (o.dot) {
      write_file(o.out_dir / "predictions" / (s.doc.id + ".dot"),
                 export_dot(s.doc, s.doc.gold_edges, p.edges));
    }
    out.push_back(std::move(p));
  }
  log << "wrote predictions for " << out.size() << " documents\n";
  return out;
}

// Writes one annotation CSV per synthetic document and a manifest.
inline fs::path synth_command(const SynthConfig& cfg, const fs::path& out_dir,
                              std::ostream& log) {
  const auto docs = synth_corpus(cfg);
  std::vector<ManifestEntry> entries;
  for (const auto& d : docs) {
    const auto path = out_dir / "annotations" / (d.id + ".csv");
    write_file(path, to_annotation_csv(d));
    entries.push_back({d.id, path});
  }
  const auto manifest = out_dir / "manifest.json";
  write_manifest(manifest, entries);
  log << "generated " << docs.size() << " documents\n";
  return manifest;
}

inline EdgeSet edges_from_json(const nlohmann::json& j) {
  EdgeSet out;
  const auto& arr = j.is_object() ? j.at("edges") : j;
  for (const auto& e : arr) {
    out.emplace(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
  }
  return out;
}

}  // namespace flowgraph::cli

#endif  // FLOWGRAPH_CLI_HPP_
