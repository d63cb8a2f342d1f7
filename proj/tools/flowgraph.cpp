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

// Command-line front end: prepare, stats, synth, train, eval, predict,
// export-dot, inspect.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "flowgraph/cli.hpp"

namespace fg = flowgraph;
namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::string out = "out";
  std::optional<std::string> window;
  std::optional<std::string> structure;
  std::optional<std::string> gnn;
  std::optional<int> layers;
  std::optional<std::string> features;
};

struct TrainFlags {
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> warmup;
  std::optional<std::string> precision;
  std::optional<std::size_t> hash_dim;
  std::optional<std::string> graph_window;
  std::optional<std::string> class_weights;
  bool symmetrize = false;
};

// Config file first, then flags on top.
fg::TrainConfig merged_config(const GlobalFlags& g, const TrainFlags& t) {
  fg::TrainConfig cfg;
  if (g.config) {
    cfg = fg::merge_config(cfg, nlohmann::json::parse(fg::read_file(*g.config)));
  }
  nlohmann::json over = nlohmann::json::object();
  if (g.seed) over["seed"] = *g.seed;
  if (g.window) over["window"] = *g.window;
  if (g.structure) over["structure"] = *g.structure;
  if (g.gnn) over["gnn"] = *g.gnn;
  if (g.layers) over["layers"] = *g.layers;
  if (g.features) over["features"] = *g.features;
  if (t.epochs) over["epochs"] = *t.epochs;
  if (t.batch_size) over["batch_size"] = *t.batch_size;
  if (t.lr) over["learning_rate"] = *t.lr;
  if (t.warmup) over["warmup_fraction"] = *t.warmup;
  if (t.precision) over["precision"] = *t.precision;
  if (t.hash_dim) over["hash_dim"] = *t.hash_dim;
  if (t.graph_window) over["graph_window"] = *t.graph_window;
  if (t.symmetrize) over["symmetrize"] = true;
  if (t.class_weights) {
    if (*t.class_weights == "balanced") {
      over["class_weights"] = "balanced";
    } else {
      const auto comma = t.class_weights->find(',');
      if (comma == std::string::npos) {
        throw fg::ValidationError("--class-weights takes 'balanced' or 'w0,w1'");
      }
      over["class_weights"] = {std::stod(t.class_weights->substr(0, comma)),
                               std::stod(t.class_weights->substr(comma + 1))};
    }
  }
  return fg::merge_config(cfg, over);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowgraph: sentence-level flow graphs for procedural text"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--config", g.config, "JSON config file (flags override it)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--window", g.window, "Candidate window: 3, 4, 5 or all");
  app.add_option("--structure", g.structure, "semi-complete or linear");
  app.add_option("--gnn", g.gnn, "none, gcn or gat");
  app.add_option("--layers", g.layers, "GNN depth: 0, 1 or 2");
  app.add_option("--features", g.features, "hash or file:<dir>");

  auto* prepare = app.add_subcommand("prepare", "Parse, filter and validate a corpus");
  prepare->fallthrough();
  fs::path prep_manifest;
  bool drop_code = false;
  prepare->add_option("--manifest", prep_manifest, "Corpus manifest (JSON)")->required();
  prepare->add_flag("--drop-code", drop_code, "Also drop CODE sentences");

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->fallthrough();
  fs::path stats_manifest;
  stats->add_option("--manifest", stats_manifest, "Corpus manifest")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  synth->fallthrough();
  fg::SynthConfig sc;
  synth->add_option("--docs", sc.n_docs, "Number of documents");
  synth->add_option("--min-size", sc.min_size, "Minimum relevant sentences");
  synth->add_option("--max-size", sc.max_size, "Maximum relevant sentences");
  synth->add_option("--skip-prob", sc.skip_prob, "Skip-edge probability");
  synth->add_option("--backbone-keep", sc.backbone_keep, "Backbone edge probability");
  synth->add_option("--rare-vocab", sc.rare_vocab, "Rare-token vocabulary size");
  synth->add_option("--none-prob", sc.none_prob, "Irrelevant-sentence probability");

  auto* train = app.add_subcommand("train", "Train an edge model");
  train->fallthrough();
  fs::path train_manifest;
  TrainFlags tf;
  train->add_option("--manifest", train_manifest, "Prepared corpus manifest")->required();
  train->add_option("--epochs", tf.epochs);
  train->add_option("--batch-size", tf.batch_size);
  train->add_option("--lr", tf.lr);
  train->add_option("--warmup", tf.warmup, "Warmup fraction of total steps");
  train->add_option("--precision", tf.precision, "float32 or float64");
  train->add_option("--hash-dim", tf.hash_dim, "Hash encoder dimension");
  train->add_option("--graph-window", tf.graph_window,
                    "Span of the semi-complete message-passing graph");
  train->add_option("--class-weights", tf.class_weights, "balanced or w0,w1");
  train->add_flag("--symmetrize", tf.symmetrize, "Aggregate over both edge directions");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->fallthrough();
  fg::cli::EvalOptions eo;
  bool best_f1 = false;
  eval->add_option("--checkpoint", eo.checkpoint)->required();
  eval->add_option("--manifest", eo.manifest, "Prepared corpus manifest")->required();
  eval->add_option("--split", eo.split, "train, validation, test or all");
  eval->add_flag("--per-doc", eo.per_doc, "Also report per-document PRAUC");
  eval->add_flag("--best-f1", best_f1, "Best-threshold F1 (always in the report)");

  auto* predict = app.add_subcommand("predict", "Predict flow graphs");
  predict->fallthrough();
  fg::cli::PredictOptions po;
  predict->add_option("--checkpoint", po.checkpoint)->required();
  predict->add_option("--manifest", po.manifest, "Prepared corpus manifest")->required();
  predict->add_option("--split", po.split, "train, validation, test or all");
  predict->add_flag("--dot", po.dot, "Also write DOT files");

  auto* dot = app.add_subcommand("export-dot", "Render a document graph as DOT");
  dot->fallthrough();
  fs::path dot_doc, dot_pred, dot_out;
  bool no_gold = false;
  dot->add_option("--doc", dot_doc, "Prepared document JSON")->required();
  dot->add_option("--predictions", dot_pred, "Prediction JSON from predict");
  dot->add_flag("--no-gold", no_gold, "Omit gold edges");
  dot->add_option("--output", dot_out, "DOT file (default <out>/<id>.dot)");

  auto* inspect = app.add_subcommand("inspect", "Show an embedding file's header and trailer");
  fs::path inspect_file;
  inspect->add_option("file", inspect_file)->required();

  CLI11_PARSE(app, argc, argv);

  const fs::path out = g.out;
  const std::string command = app.get_subcommands().front()->get_name();
  fg::cli::RunRecorder rec(out, command);
  auto& m = rec.manifest();
  m.seed = g.seed.value_or(0);
  try {
    if (*prepare) {
      m.inputs = {prep_manifest.string()};
      const auto r = fg::cli::prepare_corpus({prep_manifest, out, drop_code}, std::cout);
      m.config = {{"drop_code", drop_code}};
      m.outputs = {r.manifest.string(), (out / "rejects.json").string()};
      return rec.finish(r.accepted.empty() ? fg::cli::kValidationFailure : fg::cli::kOk);
    }
    if (*stats) {
      m.inputs = {stats_manifest.string()};
      const auto docs = fg::cli::load_corpus(stats_manifest);
      const auto j = fg::to_json(fg::compute_stats(docs));
      fg::write_file(out / "stats.json", j.dump(2) + "\n");
      m.outputs = {(out / "stats.json").string()};
      auto summary = j;
      summary.erase("per_document");
      std::cout << summary.dump(2) << "\n";
      return rec.finish(fg::cli::kOk);
    }
    if (*synth) {
      if (g.seed) sc.seed = *g.seed;
      m.config = fg::to_json(sc);
      const auto manifest = fg::cli::synth_command(sc, out, std::cout);
      m.outputs = {manifest.string()};
      return rec.finish(fg::cli::kOk);
    }
    if (*train) {
      const auto cfg = merged_config(g, tf);
      m.config = fg::to_json(cfg);
      m.seed = cfg.seed;
      m.inputs = {train_manifest.string()};
      const auto o = fg::cli::train_command(train_manifest, cfg, out, std::cout);
      m.outputs = {o.checkpoint.string(), (out / "split.json").string(),
                   (out / "train_log.json").string()};
      return rec.finish(fg::cli::kOk);
    }
    if (*eval) {
      eo.out_dir = out;
      m.inputs = {eo.checkpoint.string(), eo.manifest.string()};
      const auto j = fg::cli::eval_command(eo, std::cout);
      m.config = j.at("config");
      m.config["split"] = eo.split;
      m.seed = j.at("config").at("seed").get<std::uint64_t>();
      m.outputs = {(out / "report.json").string(), (out / "curve.csv").string()};
      return rec.finish(fg::cli::kOk);
    }
    if (*predict) {
      po.out_dir = out;
      m.inputs = {po.checkpoint.string(), po.manifest.string()};
      const auto preds = fg::cli::predict_command(po, std::cout);
      for (const auto& p : preds) {
        m.outputs.push_back((out / "predictions" / (p.doc_id + ".json")).string());
      }
      return rec.finish(fg::cli::kOk);
    }
    if (*dot) {
      const auto doc = fg::load_document_json(dot_doc);
      std::optional<fg::EdgeSet> gold, pred;
      if (!no_gold) gold = doc.gold_edges;
      if (!dot_pred.empty()) {
        pred = fg::cli::edges_from_json(nlohmann::json::parse(fg::read_file(dot_pred)));
      }
      const fs::path target = dot_out.empty() ? out / (doc.id + ".dot") : dot_out;
      fg::write_file(target, fg::export_dot(doc, gold, pred));
      m.inputs = {dot_doc.string()};
      if (!dot_pred.empty()) m.inputs.push_back(dot_pred.string());
      m.outputs = {target.string()};
      return rec.finish(fg::cli::kOk);
    }
    if (*inspect) {
      const auto f = fg::inspect_embeddings(inspect_file);
      nlohmann::json trailer = f.trailer.extra;
      trailer["doc_id"] = f.trailer.doc_id;
      trailer["provider"] = f.trailer.provider;
      std::cout << nlohmann::json{{"rows", f.matrix.rows},
                                  {"cols", f.matrix.cols},
                                  {"trailer", trailer}}
                       .dump(2)
                << "\n";
      return fg::cli::kOk;
    }
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rec.finish(fg::cli::kValidationFailure);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rec.finish(fg::cli::exit_code_for(e));
  }
  return fg::cli::kOk;
}
