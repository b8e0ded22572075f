// cfgsentry command-line driver. See docs/cfgsentry.1.md for the reference.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfgsentry/adversarial.h"
#include "cfgsentry/config.h"
#include "cfgsentry/corpus.h"
#include "cfgsentry/experiment.h"
#include "cfgsentry/features.h"
#include "cfgsentry/fhmc.h"
#include "cfgsentry/graph_io.h"
#include "cfgsentry/learn.h"
#include "cfgsentry/mining.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cfgsentry;

namespace {

enum ExitCode {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kMissingInput = 4,
  kBadInput = 5,
  kTraining = 6,
  kTimeout = 7,
};

class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config = "default";
  std::string out;
};

struct Args {
  Common common;
  std::string corpus, patterns, model, task = "detector", arch = "cnn";
  std::string mode = "gea", strategy = "maximum", target = "benign";
  std::string victims, pool, candidates;
  std::string detector, classifier, sbd;
  std::vector<std::string> graphs;
  bool timing = false;
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--seed", c.seed, "Master seed (overrides corpus.seed)");
  cmd->add_option("--config", c.config, "INI config file, or 'default'");
  cmd->add_option("--out", c.out, "Output directory")->required();
}

const fs::path &existing(const fs::path &p) {
  if (!fs::exists(p)) throw MissingInput("input not found: " + p.string());
  return p;
}

ExperimentConfig load_config(const Common &c) {
  if (c.config != "default") existing(c.config);
  ExperimentConfig config = load_experiment_config(c.config);
  if (c.seed) config.corpus.seed = *c.seed;
  config.validate();
  return config;
}

std::vector<LabeledSample> load_samples(const std::string &manifest, const char *flag) {
  if (manifest.empty()) throw UsageError(std::string(flag) + " is required");
  return load_corpus(existing(manifest));
}

RankedPatternSet load_ranked(const std::string &path) {
  if (path.empty()) throw UsageError("--patterns is required");
  return parse_ranked_set(read_file(existing(path)));
}

Model load_model_arg(const std::string &path, const char *flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  return load_model(existing(path));
}

std::vector<std::uint8_t> encode_sample(const Cfg &g, const RankedPatternSet &set,
                                        const ExperimentConfig &config) {
  return encode(g, set, config.encode_timeout);
}

void write_out(const Common &c, const std::string &name, const std::string &contents) {
  write_file(fs::path(c.out) / name, contents);
}

// Training data for one task; sbd inputs are pattern vectors.
Dataset task_dataset(const std::string &task, const std::vector<LabeledSample> &samples,
                     const std::optional<RankedPatternSet> &set, const ExperimentConfig &config) {
  if (task == "detector") return detector_dataset(samples);
  if (task == "classifier") return classifier_dataset(samples);
  Dataset d;
  for (const auto &s : samples) {
    auto bits = encode_sample(s.cfg, *set, config);
    d.x.emplace_back(bits.begin(), bits.end());
    d.y.push_back(is_malware(s.cls) ? kSbdSuspicious : kSbdBenign);
  }
  return d;
}

void check_task(const std::string &task) {
  if (task != "detector" && task != "classifier" && task != "sbd")
    throw UsageError("--task must be detector, classifier or sbd");
}

int cmd_gen(const Args &a) {
  const ExperimentConfig config = load_config(a.common);
  const auto corpus = generate_corpus(config.corpus);
  const auto [train, test] = split_corpus(corpus, config.train_fraction, split_seed(config));
  save_corpus(corpus, a.common.out);
  save_manifest(train, fs::path(a.common.out) / "train.json");
  save_manifest(test, fs::path(a.common.out) / "test.json");
  write_out(a.common, "config.ini", experiment_config_ini(config));
  return kOk;
}

int cmd_features(const Args &a) {
  load_config(a.common);
  std::vector<std::string> ids;
  std::vector<FeatureVector> rows;
  if (!a.corpus.empty()) {
    for (const auto &s : load_samples(a.corpus, "--corpus")) {
      ids.push_back(s.id);
      rows.push_back(extract_features(s.cfg));
    }
  }
  for (const auto &g : a.graphs) {
    ids.push_back(fs::path(g).stem().string());
    rows.push_back(extract_features(load_graph(existing(g))));
  }
  if (ids.empty()) throw UsageError("give --corpus or --graph");
  std::ostringstream out;
  write_feature_csv(out, ids, rows);
  write_out(a.common, "features.csv", out.str());
  return kOk;
}

int cmd_train(const Args &a) {
  check_task(a.task);
  const ExperimentConfig config = load_config(a.common);
  const auto samples = load_samples(a.corpus, "--corpus");
  std::optional<RankedPatternSet> set;
  if (a.task == "sbd") set = load_ranked(a.patterns);
  const Dataset data = task_dataset(a.task, samples, set, config);
  if (data.x.empty()) throw TrainingError("no training samples for this task");
  const Architecture arch = a.task == "sbd" ? Architecture::kCnn : parse_architecture(a.arch);
  const int classes = a.task == "classifier" ? kNumSampleClasses - 1 : 2;
  Model m(arch, static_cast<int>(data.x.front().size()), classes);
  TrainConfig tc = a.task == "sbd" ? config.sbd_train : config.train;
  tc.seed = model_seed(config, a.task, arch);
  const auto history = train(m, data, tc);
  save_model(m, fs::path(a.common.out) / "model.bin");
  write_out(a.common, "history.json", nlohmann::json{{"epoch_loss", history}}.dump(1) + "\n");
  return kOk;
}

int cmd_eval(const Args &a) {
  check_task(a.task);
  const ExperimentConfig config = load_config(a.common);
  const Model m = load_model_arg(a.model, "--model");
  const auto samples = load_samples(a.corpus, "--corpus");
  std::optional<RankedPatternSet> set;
  if (a.task == "sbd") set = load_ranked(a.patterns);
  const Dataset data = task_dataset(a.task, samples, set, config);
  if (data.x.empty()) throw UsageError("no evaluation samples for this task");
  write_out(a.common, "metrics.json", metrics_json(evaluate(m, data, a.task != "classifier")));
  return kOk;
}

int cmd_mine(const Args &a) {
  const ExperimentConfig config = load_config(a.common);
  const auto samples = load_samples(a.corpus, "--corpus");
  for (const auto &fc : mine_family_candidates(samples, config))
    write_out(a.common, "mined_" + std::string(class_name(fc.family)) + ".json",
              serialize_patterns(fc.patterns));
  write_out(a.common, "sgea_candidates.json", serialize_patterns(mine_sgea_patterns(samples, config)));
  return kOk;
}

int cmd_rank(const Args &a) {
  const ExperimentConfig config = load_config(a.common);
  const auto samples = load_samples(a.corpus, "--corpus");
  if (a.candidates.empty()) throw UsageError("--candidates is required");
  std::vector<FamilyCandidates> candidates;
  for (int c = 1; c < kNumSampleClasses; ++c) {
    const auto family = static_cast<SampleClass>(c);
    const fs::path file = fs::path(a.candidates) / ("mined_" + std::string(class_name(family)) + ".json");
    if (!fs::exists(file)) continue;
    candidates.push_back({family, parse_patterns(read_file(file))});
  }
  if (candidates.empty()) throw MissingInput("no mined_<family>.json files in " + a.candidates);
  const RankedPatternSet set = rank_patterns(candidates, samples, config.rank);
  for (const auto &w : set.warnings) std::cerr << "warning: " << w << "\n";
  write_out(a.common, "ranked.json", serialize_ranked_set(set));
  return kOk;
}

int cmd_encode(const Args &a) {
  const ExperimentConfig config = load_config(a.common);
  const auto samples = load_samples(a.corpus, "--corpus");
  const RankedPatternSet set = load_ranked(a.patterns);
  std::vector<std::string> ids;
  std::vector<std::vector<std::uint8_t>> vectors;
  for (const auto &s : samples) {
    ids.push_back(s.id);
    vectors.push_back(encode_sample(s.cfg, set, config));
  }
  write_out(a.common, "vectors.csv", pattern_vectors_csv(ids, vectors));
  return kOk;
}

int cmd_attack(const Args &a) {
  const ExperimentConfig config = load_config(a.common);
  if (a.task != "detector" && a.task != "classifier")
    throw UsageError("--task must be detector or classifier");
  const Model m = load_model_arg(a.model, "--model");
  const auto victims = load_samples(a.victims, "--victims");
  SampleClass target_class;
  try {
    target_class = parse_class(a.target);
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }
  int target;
  if (a.task == "detector") {
    target = is_malware(target_class) ? 1 : 0;
  } else {
    if (!is_malware(target_class)) throw UsageError("classifier targets must be families");
    target = static_cast<int>(target_class) - 1;
  }
  const Predictor predict = feature_predictor(m);
  AttackReport report;
  if (a.mode == "gea") {
    GeaStrategy strategy;
    try {
      strategy = parse_strategy(a.strategy);
    } catch (const std::invalid_argument &e) {
      throw UsageError(e.what());
    }
    report = gea_attack(predict, victims, load_samples(a.pool, "--pool"), strategy, target);
  } else if (a.mode == "sgea") {
    if (a.candidates.empty()) throw UsageError("--candidates is required for sgea");
    auto patterns = parse_patterns(read_file(existing(a.candidates)));
    std::stable_sort(patterns.begin(), patterns.end(), [](const Pattern &x, const Pattern &y) {
      return x.node_count() < y.node_count();
    });
    std::vector<Cfg> graphs;
    for (const auto &p : patterns) graphs.push_back(pattern_cfg(p.graph));
    report = sgea_attack_all(predict, victims, graphs, target, config.sgea_max_injection,
                             config.sgea_targeted);
  } else {
    throw UsageError("--mode must be gea or sgea");
  }
  report.model = a.task;
  report.architecture = std::string(architecture_name(m.architecture()));
  report.target_name = std::string(class_name(target_class));
  write_out(a.common, "report.json", attack_report_json(report, a.timing));
  std::vector<AttackReport> one{report};
  write_out(a.common, "summary.csv", attack_table_csv(one, a.timing));
  for (const auto &r : report.records)
    if (r.adversarial) write_out(a.common, "adversarial/" + r.id + ".json", serialize_graph(*r.adversarial));
  return kOk;
}

int cmd_pipeline(const Args &a) {
  const ExperimentConfig config = load_config(a.common);
  const Model det = load_model_arg(a.detector, "--detector");
  const Model cls = load_model_arg(a.classifier, "--classifier");
  const Model sbd = load_model_arg(a.sbd, "--sbd");
  const RankedPatternSet set = load_ranked(a.patterns);
  if (sbd.input_width() != set.size())
    throw ShapeError("SBD width does not match the pattern set size");
  const auto samples = load_samples(a.corpus, "--corpus");
  const PipelineStages stages = model_stages(det, cls, sbd, set, config.encode_timeout);
  std::string log;
  for (const auto &s : samples) {
    PipelineVerdict v = classify_pipeline(s.cfg, stages);
    v.id = s.id;
    log += verdict_json_line(v);
  }
  write_out(a.common, "verdicts.jsonl", log);
  return kOk;
}

int cmd_repro(const Args &a) {
  const ExperimentConfig config = load_config(a.common);
  ReproOptions options;
  options.timing = a.timing;
  options.log = &std::cerr;
  run_repro(config, a.common.out, options);
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"cfgsentry: CFG malware detection, adversarial examples and pattern defense"};
  app.require_subcommand(1);
  Args a;

  auto *gen = app.add_subcommand("gen", "Synthesize a labeled corpus and its train/test split");
  add_common(gen, a.common);

  auto *features = app.add_subcommand("features", "Extract the 23 graph features to CSV");
  add_common(features, a.common);
  features->add_option("--corpus", a.corpus, "Corpus manifest");
  features->add_option("--graph", a.graphs, "Graph JSON or DOT file (repeatable)");

  auto *train_cmd = app.add_subcommand("train", "Train a detector, family classifier or SBD");
  add_common(train_cmd, a.common);
  train_cmd->add_option("--task", a.task, "detector | classifier | sbd");
  train_cmd->add_option("--arch", a.arch, "cnn | dnn (sbd is always cnn)");
  train_cmd->add_option("--corpus", a.corpus, "Training manifest");
  train_cmd->add_option("--patterns", a.patterns, "Ranked pattern set (sbd)");

  auto *eval_cmd = app.add_subcommand("eval", "Evaluate a model and write metrics JSON");
  add_common(eval_cmd, a.common);
  eval_cmd->add_option("--task", a.task, "detector | classifier | sbd");
  eval_cmd->add_option("--model", a.model, "Model checkpoint");
  eval_cmd->add_option("--corpus", a.corpus, "Evaluation manifest");
  eval_cmd->add_option("--patterns", a.patterns, "Ranked pattern set (sbd)");

  auto *mine = app.add_subcommand("mine", "Mine discriminative patterns per family and for SGEA");
  add_common(mine, a.common);
  mine->add_option("--corpus", a.corpus, "Training manifest");

  auto *rank = app.add_subcommand("rank", "Rank mined patterns into the global pattern set");
  add_common(rank, a.common);
  rank->add_option("--corpus", a.corpus, "Training manifest");
  rank->add_option("--candidates", a.candidates, "Directory holding mined_<family>.json");

  auto *encode_cmd = app.add_subcommand("encode", "Hot-encode samples over a ranked pattern set");
  add_common(encode_cmd, a.common);
  encode_cmd->add_option("--corpus", a.corpus, "Manifest");
  encode_cmd->add_option("--patterns", a.patterns, "Ranked pattern set");

  auto *attack = app.add_subcommand("attack", "Craft GEA or SGEA adversarial examples");
  add_common(attack, a.common);
  attack->add_option("--mode", a.mode, "gea | sgea");
  attack->add_option("--strategy", a.strategy, "minimum | median | maximum (gea)");
  attack->add_option("--task", a.task, "detector | classifier");
  attack->add_option("--model", a.model, "Model checkpoint under attack");
  attack->add_option("--victims", a.victims, "Manifest of samples to perturb");
  attack->add_option("--pool", a.pool, "Manifest of target-class samples (gea)");
  attack->add_option("--candidates", a.candidates, "Pattern file of injection candidates (sgea)");
  attack->add_option("--target", a.target, "Target class name");
  attack->add_flag("--timing", a.timing, "Record wall-clock crafting times");

  auto *pipeline = app.add_subcommand("pipeline", "Run the hierarchical pipeline");
  add_common(pipeline, a.common);
  pipeline->add_option("--detector", a.detector, "Detector checkpoint");
  pipeline->add_option("--classifier", a.classifier, "Family classifier checkpoint");
  pipeline->add_option("--sbd", a.sbd, "SBD checkpoint");
  pipeline->add_option("--patterns", a.patterns, "Ranked pattern set");
  pipeline->add_option("--corpus", a.corpus, "Manifest to classify");

  auto *repro = app.add_subcommand("repro", "Run every stage end to end");
  add_common(repro, a.common);
  repro->add_flag("--timing", a.timing, "Record wall-clock crafting times");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(a);
    if (*features) return cmd_features(a);
    if (*train_cmd) return cmd_train(a);
    if (*eval_cmd) return cmd_eval(a);
    if (*mine) return cmd_mine(a);
    if (*rank) return cmd_rank(a);
    if (*encode_cmd) return cmd_encode(a);
    if (*attack) return cmd_attack(a);
    if (*pipeline) return cmd_pipeline(a);
    if (*repro) return cmd_repro(a);
  } catch (const UsageError &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const MissingInput &e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return kMissingInput;
  } catch (const EncodingTimeout &e) {
    std::cerr << "timeout: " << e.what() << "\n";
    return kTimeout;
  } catch (const TrainingError &e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kTraining;
  } catch (const GraphError &e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kBadInput;
  } catch (const ShapeError &e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
