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

#include "flowgraph/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

namespace flowgraph {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory per test.
fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "flowgraph_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string cli_path() {
  const char* p = std::getenv("FLOWGRAPH_CLI");
  return p ? p : "flowgraph";
}

// Runs the CLI binary and returns its exit status; stdout goes to `log`.
int run(const std::string& args, const fs::path& log = "/dev/null") {
  const std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_file(p); }

std::size_t count_lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

const char* kGood =
    "sent_id,text,stype,next_ids\n"
    "0,\"Intro text.\",NONE,\n"
    "1,\"Open the binary in gdb.\",A,2\n"
    "2,\"It crashes at main.\",I,3\n"
    "3,\"Patch the jump.\",A,\n";

void write_corpus(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& docs) {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& [id, csv] : docs) {
    write_file(dir / "raw" / (id + ".csv"), csv);
    m.push_back({{"id", id}, {"path", "raw/" + id + ".csv"}});
  }
  write_file(dir / "corpus.json", m.dump());
}

TEST(ExportDot, Examples) {
  Document d{"d",
             {{0, "First \"quoted\" sentence", SentenceType::kAction},
              {1, "Second", SentenceType::kInformation},
              {2, "Third", SentenceType::kCode}},
             {{0, 1}}};
  const auto one = export_dot(d, d.gold_edges, std::nullopt);
  EXPECT_EQ(std::count(one.begin(), one.end(), '>') - 0, 1);
  EXPECT_NE(one.find("s0 -> s1"), std::string::npos);
  EXPECT_NE(one.find("\\\"quoted\\\""), std::string::npos);
  EXPECT_NE(one.find("[A]"), std::string::npos);

  const auto none = export_dot(d, EdgeSet{}, std::nullopt);
  EXPECT_EQ(none.find("->"), std::string::npos);
  EXPECT_NE(none.find("s2 [label="), std::string::npos);

  const auto both = export_dot(d, EdgeSet{{0, 1}}, EdgeSet{{0, 1}, {0, 2}});
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto p = both.find(needle); p != std::string::npos; p = both.find(needle, p + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count("class=agree"), 1u);
  EXPECT_EQ(count("class=predicted_only"), 1u);
  EXPECT_EQ(count("class=gold_only"), 0u);
  EXPECT_EQ(count("->"), 2u);

  Document longdoc{"l", {{0, std::string(100, 'x'), SentenceType::kAction}}, {}};
  EXPECT_NE(export_dot(longdoc, std::nullopt, std::nullopt, 10).find("xxxxxxxxxx..."),
            std::string::npos);
}

TEST(Prepare, AcceptsAndRejects) {
  const auto dir = scratch("prepare");
  write_corpus(dir, {{"a", kGood},
                     {"b", kGood},
                     {"c", kGood},
                     {"backward", "sent_id,text,stype,next_ids\n0,x,A,\n1,y,A,0\n"},
                     {"single", "sent_id,text,stype,next_ids\n0,x,A,\n1,y,NONE,\n"}});
  const auto out = dir / "out";
  ASSERT_EQ(run("prepare --manifest " + (dir / "corpus.json").string() + " --out " + out.string()),
            0);
  for (const char* id : {"a", "b", "c"}) {
    EXPECT_TRUE(fs::exists(out / "docs" / (std::string(id) + ".json"))) << id;
  }
  EXPECT_FALSE(fs::exists(out / "docs" / "backward.json"));
  const auto rejects = nlohmann::json::parse(slurp(out / "rejects.json"));
  ASSERT_EQ(rejects.size(), 2u);
  EXPECT_EQ(rejects[0]["id"], "backward");
  EXPECT_NE(rejects[0]["reason"].get<std::string>().find("backward edge"), std::string::npos);
  EXPECT_EQ(rejects[1]["id"], "single");
  EXPECT_EQ(load_manifest(out / "manifest.json").size(), 3u);
  const auto doc = load_document_json(out / "docs" / "a.json");
  EXPECT_EQ(doc.size(), 3u);
  EXPECT_EQ(doc.gold_edges, (EdgeSet{{0, 1}, {1, 2}}));
  EXPECT_EQ(count_lines(out / "runs.jsonl"), 1u);
}

TEST(Prepare, StableOnItsOwnOutput) {
  const auto dir = scratch("stable");
  write_corpus(dir, {{"a", kGood}, {"b", kGood}});
  ASSERT_EQ(run("prepare --manifest " + (dir / "corpus.json").string() + " --out " +
                (dir / "one").string()),
            0);
  ASSERT_EQ(run("prepare --manifest " + (dir / "one" / "manifest.json").string() + " --out " +
                (dir / "two").string()),
            0);
  for (const char* id : {"a", "b"}) {
    const auto f = std::string(id) + ".json";
    EXPECT_EQ(slurp(dir / "one" / "docs" / f), slurp(dir / "two" / "docs" / f));
  }
  EXPECT_EQ(slurp(dir / "one" / "manifest.json"), slurp(dir / "two" / "manifest.json"));
}

TEST(Prepare, ExitCodes) {
  const auto dir = scratch("exits");
  write_corpus(dir, {{"bad", "sent_id,text,stype,next_ids\n0,x,A,\n"}});
  EXPECT_EQ(run("prepare --manifest " + (dir / "corpus.json").string() + " --out " +
                (dir / "o").string()),
            1);
  EXPECT_EQ(run("prepare --manifest " + (dir / "missing.json").string() + " --out " +
                (dir / "o").string()),
            2);
  write_file(dir / "broken.json", "{not json");
  EXPECT_EQ(run("prepare --manifest " + (dir / "broken.json").string() + " --out " +
                (dir / "o").string()),
            1);
}

TEST(PrepareLibrary, ReportsReasons) {
  const auto dir = scratch("prepare_lib");
  write_corpus(dir, {{"a", kGood}, {"a2", "sent_id,text,stype,next_ids\n0,x,A,7\n1,y,A,\n"}});
  std::ostringstream log;
  const auto r = cli::prepare_corpus({dir / "corpus.json", dir / "out", false}, log);
  EXPECT_EQ(r.accepted, (std::vector<std::string>{"a"}));
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_NE(log.str().find("rejected a2"), std::string::npos);
}

TEST(Synth, DeterministicAndForward) {
  const auto dir = scratch("synth");
  ASSERT_EQ(run("synth --docs 20 --seed 5 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("synth --docs 20 --seed 5 --out " + (dir / "b").string()), 0);
  ASSERT_EQ(run("synth --docs 20 --seed 6 --out " + (dir / "c").string()), 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "annotations")) {
    const auto name = e.path().filename();
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / "annotations" / name));
    const auto doc = load_annotation_file(e.path());
    for (const auto& [i, j] : doc.gold_edges) EXPECT_LT(i, j);
    ++files;
  }
  EXPECT_EQ(files, 20u);
  EXPECT_NE(slurp(dir / "a" / "annotations" / "synth-00.csv"),
            slurp(dir / "c" / "annotations" / "synth-00.csv"));
  EXPECT_EQ(run("synth --docs 2 --min-size 1 --out " + (dir / "d").string()), 1);
  EXPECT_EQ(run("synth --docs 2 --min-size 9 --max-size 4 --out " + (dir / "d").string()), 1);
}

TEST(Synth, DegreeMatchesTarget) {
  SynthConfig c;
  c.n_docs = 500;
  c.seed = 0;
  std::vector<Document> docs;
  for (const auto& d : synth_corpus(c)) {
    docs.push_back(filter_relevant(d));
    ASSERT_GE(docs.back().size(), 6u);
    ASSERT_LE(docs.back().size(), 14u);
  }
  EXPECT_NEAR(compute_stats(docs).avg_node_degree, 1.88, 0.15);
}

// End-to-end run on a small synthetic corpus.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("pipeline");
    ASSERT_EQ(run("synth --docs 30 --seed 1 --out " + (dir_ / "syn").string()), 0);
    ASSERT_EQ(run("prepare --manifest " + (dir_ / "syn" / "manifest.json").string() +
                  " --out " + (dir_ / "prep").string()),
              0);
    write_file(dir_ / "cfg.json", R"({"epochs": 50, "learning_rate": 0.5, "hash_dim": 32,
                                     "hidden1": 16})");
    ASSERT_EQ(run("train --config " + (dir_ / "cfg.json").string() +
                  " --epochs 3 --lr 0.005 --manifest " + manifest().string() + " --out " +
                  (dir_ / "run").string()),
              0);
  }
  static fs::path manifest() { return dir_ / "prep" / "manifest.json"; }
  static fs::path ckpt() { return dir_ / "run" / "checkpoint.fgck"; }
  static inline fs::path dir_;
};

TEST_F(Pipeline, TrainWritesArtifactsAndFlagsOverrideConfig) {
  EXPECT_TRUE(fs::exists(dir_ / "run" / "split.json"));
  const auto log = nlohmann::json::parse(slurp(dir_ / "run" / "train_log.json"));
  EXPECT_EQ(log["history"].size(), 3u);
  const auto ck = load_checkpoint(ckpt());
  EXPECT_EQ(ck.config.epochs, 3);
  EXPECT_EQ(ck.config.learning_rate, 0.005);
  EXPECT_EQ(ck.config.features.hash_dim, 32u);
  EXPECT_EQ(ck.feature_dim, 32u);
  const auto runs = slurp(dir_ / "run" / "runs.jsonl");
  const auto rec = nlohmann::json::parse(runs.substr(0, runs.find('\n')));
  EXPECT_EQ(rec["command"], "train");
  EXPECT_EQ(rec["config"]["learning_rate"], 0.005);
  EXPECT_EQ(rec["config"]["epochs"], 3);
}

TEST_F(Pipeline, EvalWritesReport) {
  const auto out = dir_ / "eval";
  ASSERT_EQ(run("eval --checkpoint " + ckpt().string() + " --manifest " + manifest().string() +
                " --per-doc --out " + out.string()),
            0);
  const auto rep = nlohmann::json::parse(slurp(out / "report.json"));
  ASSERT_TRUE(rep["prauc"].is_number());
  EXPECT_GE(rep["prauc"].get<double>(), 0.0);
  EXPECT_EQ(rep["split"], "test");
  EXPECT_TRUE(rep.contains("config_hash"));
  EXPECT_TRUE(rep["baselines"]["weighted_random"]["f1"].is_number());
  EXPECT_TRUE(rep.contains("macro_prauc"));
  EXPECT_GT(count_lines(out / "curve.csv"), 1u);
  // Same inputs, same report.
  ASSERT_EQ(run("eval --checkpoint " + ckpt().string() + " --manifest " + manifest().string() +
                " --per-doc --out " + (dir_ / "eval2").string()),
            0);
  EXPECT_EQ(slurp(out / "report.json"), slurp(dir_ / "eval2" / "report.json"));
}

TEST_F(Pipeline, EvalDimensionMismatchFailsBeforeOutput) {
  // Embedding files of the wrong width for every prepared document.
  const auto feats = dir_ / "feats";
  for (const auto& e : load_manifest(manifest())) {
    const auto doc = load_document_json(e.path);
    write_embeddings(hash_encode(doc.texts(), 16, 0), feats / (doc.id + ".fgem"),
                     {doc.id, "hash", {}});
  }
  auto ck = load_checkpoint(ckpt());
  ck.config.features.source = "file:" + feats.string();
  save_checkpoint(ck, dir_ / "wrongdim.fgck");
  const auto out = dir_ / "evalbad";
  EXPECT_EQ(run("eval --checkpoint " + (dir_ / "wrongdim.fgck").string() + " --manifest " +
                manifest().string() + " --out " + out.string()),
            1);
  EXPECT_FALSE(fs::exists(out / "report.json"));
  EXPECT_FALSE(fs::exists(out / "curve.csv"));
}

TEST_F(Pipeline, PredictWritesOneFilePerDocument) {
  const auto out = dir_ / "pred";
  ASSERT_EQ(run("predict --checkpoint " + ckpt().string() + " --manifest " +
                manifest().string() + " --dot --out " + out.string()),
            0);
  std::size_t json = 0, dot = 0;
  for (const auto& e : fs::directory_iterator(out / "predictions")) {
    json += e.path().extension() == ".json";
    dot += e.path().extension() == ".dot";
  }
  EXPECT_EQ(json, 30u);
  EXPECT_EQ(dot, 30u);
  const auto p = nlohmann::json::parse(slurp(out / "predictions" / "synth-00.json"));
  EXPECT_TRUE(p["edges"].is_array());
  EXPECT_FALSE(p["pairs"].empty());

  const auto dotfile = dir_ / "one.dot";
  ASSERT_EQ(run("export-dot --doc " + (dir_ / "prep" / "docs" / "synth-00.json").string() +
                " --predictions " + (out / "predictions" / "synth-00.json").string() +
                " --output " + dotfile.string() + " --out " + (dir_ / "dotrun").string()),
            0);
  EXPECT_EQ(slurp(dotfile).rfind("digraph", 0), 0u);
  EXPECT_EQ(run("export-dot --doc " + (dir_ / "nope.json").string() + " --out " +
                (dir_ / "dotrun").string()),
            2);
}

TEST_F(Pipeline, StatsCommand) {
  const auto out = dir_ / "stats";
  ASSERT_EQ(run("stats --manifest " + manifest().string() + " --out " + out.string()), 0);
  const auto j = nlohmann::json::parse(slurp(out / "stats.json"));
  EXPECT_EQ(j["doc_count"], 30);
  EXPECT_GT(j["avg_node_degree"].get<double>(), 1.0);
}

TEST(Inspect, PrintsTrailer) {
  const auto dir = scratch("inspect");
  write_embeddings(hash_encode({"a b", "c"}, 8, 0), dir / "x.fgem",
                   {"doc-x", "hash", {{"pooling", "first-token"}}});
  ASSERT_EQ(run("inspect " + (dir / "x.fgem").string(), dir / "log.txt"), 0);
  const auto j = nlohmann::json::parse(slurp(dir / "log.txt"));
  EXPECT_EQ(j["rows"], 2);
  EXPECT_EQ(j["cols"], 8);
  EXPECT_EQ(j["trailer"]["doc_id"], "doc-x");
  EXPECT_EQ(j["trailer"]["pooling"], "first-token");
  write_file(dir / "bad.fgem", "nope");
  EXPECT_EQ(run("inspect " + (dir / "bad.fgem").string()), 1);
}

TEST(Flags, BadValuesAreValidationFailures) {
  const auto dir = scratch("flags");
  ASSERT_EQ(run("synth --docs 10 --out " + (dir / "s").string()), 0);
  ASSERT_EQ(run("prepare --manifest " + (dir / "s" / "manifest.json").string() + " --out " +
                (dir / "p").string()),
            0);
  const auto m = (dir / "p" / "manifest.json").string();
  EXPECT_EQ(run("train --manifest " + m + " --window 0 --out " + (dir / "t").string()), 1);
  EXPECT_EQ(run("train --manifest " + m + " --gnn rnn --out " + (dir / "t").string()), 1);
  EXPECT_EQ(run("train --manifest " + m + " --layers 3 --out " + (dir / "t").string()), 1);
  EXPECT_EQ(run("train --manifest " + m + " --features file:" + (dir / "nofeat").string() +
                " --out " + (dir / "t").string()),
            2);
}

}  // namespace
}  // namespace flowgraph
