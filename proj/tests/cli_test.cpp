// Drives the command-line tool end to end on a small configuration.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

#include "cfgsentry/adversarial.h"
#include "cfgsentry/config.h"
#include "cfgsentry/fhmc.h"
#include "cfgsentry/graph_io.h"
#include "cfgsentry/learn.h"
#include "cfgsentry/mining.h"
#include "json.hpp"

#ifndef CFGSENTRY_CLI
#error "CFGSENTRY_CLI must name the command-line binary"
#endif

namespace fs = std::filesystem;

namespace cfgsentry {
namespace {

const fs::path kWork = fs::path(CFGSENTRY_WORK_DIR) / "cli_work";

int run(const std::string &args) {
  const std::string cmd = std::string("\"") + CFGSENTRY_CLI + "\" " + args + " >> \"" +
                          (kWork / "log.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const fs::path &path) { return "\"" + path.string() + "\""; }

std::string small_ini() {
  ExperimentConfig c = default_experiment_config();
  for (auto &profile : c.corpus.classes) {
    profile.count = profile.count / 4 + 4;
    profile.max_nodes = std::min(profile.max_nodes, 60);
  }
  c.train.epochs = 20;
  c.sbd_train.epochs = 10;
  c.mine_min_nodes = 3;
  c.mine_max_nodes = 4;
  c.candidates_per_family = 50;
  c.rank.top_k = 20;
  c.sgea_candidates = 5;
  c.sgea_max_injection = 4;
  return experiment_config_ini(c);
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    write_file(kWork / "small.ini", small_ini());
    cfg = "--config " + p(kWork / "small.ini") + " --seed 3";
    ASSERT_EQ(run("gen " + cfg + " --out " + p(kWork / "corpus")), 0);
    // Victims: test malware; pool: train benign.
    auto train = load_corpus(kWork / "corpus" / "train.json");
    auto test = load_corpus(kWork / "corpus" / "test.json");
    std::vector<LabeledSample> victims, pool;
    for (auto &s : test)
      if (is_malware(s.cls)) victims.push_back(s);
    for (auto &s : train)
      if (!is_malware(s.cls)) pool.push_back(s);
    save_manifest(victims, kWork / "corpus" / "victims.json");
    save_manifest(pool, kWork / "corpus" / "pool.json");
  }
  static std::string cfg;
};

std::string Cli::cfg;

TEST_F(Cli, GenWritesReadableCorpusAndConfig) {
  const auto all = load_corpus(kWork / "corpus" / "manifest.json");
  const auto train = load_corpus(kWork / "corpus" / "train.json");
  const auto test = load_corpus(kWork / "corpus" / "test.json");
  EXPECT_EQ(train.size() + test.size(), all.size());
  const auto config = parse_experiment_config(read_file(kWork / "corpus" / "config.ini"));
  EXPECT_EQ(config.corpus.seed, 3u);
}

TEST_F(Cli, FeaturesFromCorpusAndFiles) {
  const fs::path graph = kWork / "corpus" / "graphs" / "benign_0000.json";
  ASSERT_EQ(run("features " + cfg + " --corpus " + p(kWork / "corpus" / "test.json") + " --graph " +
                p(graph) + " --out " + p(kWork / "features")),
            0);
  std::istringstream csv(read_file(kWork / "features" / "features.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(load_corpus(kWork / "corpus" / "test.json").size()) + 1);
}

TEST_F(Cli, FullChain) {
  const fs::path c = kWork / "corpus";
  ASSERT_EQ(run("train " + cfg + " --task detector --arch dnn --corpus " + p(c / "train.json") +
                " --out " + p(kWork / "det")),
            0);
  ASSERT_EQ(run("train " + cfg + " --task classifier --arch dnn --corpus " + p(c / "train.json") +
                " --out " + p(kWork / "cls")),
            0);
  ASSERT_EQ(run("eval " + cfg + " --task detector --model " + p(kWork / "det" / "model.bin") +
                " --corpus " + p(c / "test.json") + " --out " + p(kWork / "eval")),
            0);
  const auto metrics = nlohmann::json::parse(read_file(kWork / "eval" / "metrics.json"));
  EXPECT_GE(metrics["accuracy"].get<double>(), 0.0);

  ASSERT_EQ(run("mine " + cfg + " --corpus " + p(c / "train.json") + " --out " + p(kWork / "mined")), 0);
  EXPECT_NO_THROW(parse_patterns(read_file(kWork / "mined" / "sgea_candidates.json")));
  ASSERT_EQ(run("rank " + cfg + " --corpus " + p(c / "train.json") + " --candidates " +
                p(kWork / "mined") + " --out " + p(kWork / "ranked")),
            0);
  const auto set = parse_ranked_set(read_file(kWork / "ranked" / "ranked.json"));
  ASSERT_GT(set.size(), 0);

  ASSERT_EQ(run("encode " + cfg + " --corpus " + p(c / "test.json") + " --patterns " +
                p(kWork / "ranked" / "ranked.json") + " --out " + p(kWork / "vectors")),
            0);
  std::vector<std::string> ids;
  std::vector<std::vector<std::uint8_t>> vectors;
  parse_pattern_vectors_csv(read_file(kWork / "vectors" / "vectors.csv"), ids, vectors);
  ASSERT_FALSE(vectors.empty());
  EXPECT_EQ(static_cast<int>(vectors[0].size()), set.size());

  ASSERT_EQ(run("train " + cfg + " --task sbd --corpus " + p(c / "train.json") + " --patterns " +
                p(kWork / "ranked" / "ranked.json") + " --out " + p(kWork / "sbd")),
            0);
  EXPECT_EQ(load_model(kWork / "sbd" / "model.bin").input_width(), set.size());

  ASSERT_EQ(run("pipeline " + cfg + " --detector " + p(kWork / "det" / "model.bin") +
                " --classifier " + p(kWork / "cls" / "model.bin") + " --sbd " +
                p(kWork / "sbd" / "model.bin") + " --patterns " +
                p(kWork / "ranked" / "ranked.json") + " --corpus " + p(c / "test.json") +
                " --out " + p(kWork / "pipeline")),
            0);
  std::istringstream log(read_file(kWork / "pipeline" / "verdicts.jsonl"));
  std::string line;
  size_t verdicts = 0;
  while (std::getline(log, line)) {
    const auto v = nlohmann::json::parse(line);
    if (v["verdict"] == "suspicious") EXPECT_EQ(v["stage"], "sbd");
    if (v["verdict"] == "malware") EXPECT_FALSE(v["family"].is_null());
    ++verdicts;
  }
  EXPECT_EQ(verdicts, load_corpus(c / "test.json").size());

  ASSERT_EQ(run("attack " + cfg + " --mode gea --strategy maximum --model " +
                p(kWork / "det" / "model.bin") + " --victims " + p(c / "victims.json") +
                " --pool " + p(c / "pool.json") + " --target benign --out " + p(kWork / "gea")),
            0);
  int largest = 0;
  for (const auto &s : load_corpus(c / "pool.json")) largest = std::max(largest, s.cfg.num_nodes());
  const auto gea = nlohmann::json::parse(read_file(kWork / "gea" / "report.json"));
  EXPECT_EQ(gea["selected_nodes"], largest);
  for (const auto &r : gea["records"])
    if (!r["pre_satisfied"].get<bool>()) EXPECT_EQ(r["injected_nodes"], largest);
  for (const auto &e : fs::directory_iterator(kWork / "gea" / "adversarial"))
    EXPECT_NO_THROW(load_graph(e.path()));

  ASSERT_EQ(run("attack " + cfg + " --mode sgea --model " + p(kWork / "det" / "model.bin") +
                " --victims " + p(c / "victims.json") + " --candidates " +
                p(kWork / "mined" / "sgea_candidates.json") + " --target benign --out " +
                p(kWork / "sgea")),
            0);
  const auto sgea = nlohmann::json::parse(read_file(kWork / "sgea" / "report.json"));
  EXPECT_LE(sgea["targeted_rate"].get<double>(), sgea["misclassification_rate"].get<double>());
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate --out x"), 2);
  EXPECT_EQ(run("gen"), 2);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("attack " + cfg + " --mode blast --out " + p(kWork / "x")), 2);
  EXPECT_EQ(run("train " + cfg + " --task nope --out " + p(kWork / "x")), 2);
  write_file(kWork / "bad.ini", "[train]\nepochs = -1\n");
  EXPECT_EQ(run("gen --config " + p(kWork / "bad.ini") + " --out " + p(kWork / "x")), 3);
  EXPECT_EQ(run("gen --config " + p(kWork / "missing.ini") + " --out " + p(kWork / "x")), 4);
  EXPECT_EQ(run("eval " + cfg + " --model " + p(kWork / "none.bin") + " --corpus " +
                p(kWork / "corpus" / "test.json") + " --out " + p(kWork / "x")),
            4);
  write_file(kWork / "broken.json", "{\"samples\": 3}");
  EXPECT_EQ(run("features " + cfg + " --corpus " + p(kWork / "broken.json") + " --out " +
                p(kWork / "x")),
            5);
}

}  // namespace
}  // namespace cfgsentry
