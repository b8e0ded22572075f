#ifndef CFGSENTRY_CONFIG_H_
#define CFGSENTRY_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "cfgsentry/corpus.h"
#include "cfgsentry/fhmc.h"
#include "cfgsentry/learn.h"

namespace cfgsentry {

// Every tunable of an end-to-end run. The master seed is corpus.seed; all
// other seeds are derived from it.
struct ExperimentConfig {
  CorpusConfig corpus = default_corpus_config();
  double train_fraction = 0.8;
  // Detector and family classifier.
  TrainConfig train;

  // Candidate mining per family (and over benign samples for SGEA).
  int mine_min_nodes = 3;
  int mine_max_nodes = 6;
  int candidates_per_family = 500;
  RankConfig rank;

  // Best benign-discriminative patterns kept per node count.
  int sgea_candidates = 40;
  int sgea_max_injection = 12;
  bool sgea_targeted = true;

  TrainConfig sbd_train;
  double encode_timeout = 60.0;

  Architecture pipeline_architecture = Architecture::kCnn;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

ExperimentConfig default_experiment_config();

// INI text with sections [corpus], [split], [train], [mining], [rank],
// [attack], [sbd] and [pipeline]. Missing keys keep their defaults; unknown
// sections or keys and malformed values throw ConfigError.
ExperimentConfig parse_experiment_config(std::string_view ini);

// "default" yields the built-in defaults; anything else is read as a file.
ExperimentConfig load_experiment_config(const std::string &name_or_path);

// Every key with its effective value; parses back to the same config.
std::string experiment_config_ini(const ExperimentConfig &config);

}  // namespace cfgsentry

#endif  // CFGSENTRY_CONFIG_H_
