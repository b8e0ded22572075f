#ifndef CFGSENTRY_EXPERIMENT_H_
#define CFGSENTRY_EXPERIMENT_H_

#include <array>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cfgsentry/adversarial.h"
#include "cfgsentry/config.h"
#include "cfgsentry/fhmc.h"
#include "cfgsentry/learn.h"
#include "cfgsentry/mining.h"

namespace cfgsentry {

// Detector labels: 0 benign, 1 malware.
Dataset detector_dataset(std::span<const LabeledSample> samples);
// Family classifier labels: class - 1, malware samples only.
Dataset classifier_dataset(std::span<const LabeledSample> samples);

std::vector<LabeledSample> samples_of(std::span<const LabeledSample> samples, SampleClass cls);

// Seeds of the individual stages, derived from the master seed.
std::uint64_t split_seed(const ExperimentConfig &config);
std::uint64_t model_seed(const ExperimentConfig &config, std::string_view task, Architecture arch);

// CORK candidates of every family, mined one-vs-rest over `train` with the
// family floor as the support threshold.
std::vector<FamilyCandidates> mine_family_candidates(std::span<const LabeledSample> train,
                                                     const ExperimentConfig &config);

// Benign-discriminative patterns for SGEA: the best `sgea_candidates` of
// every node count up to `sgea_max_injection`, sorted by node count.
std::vector<Pattern> mine_sgea_patterns(std::span<const LabeledSample> train,
                                        const ExperimentConfig &config);

// Encodes every sample and trains the SBD on benign vs malicious labels.
Model train_sbd_on(std::span<const LabeledSample> train, const RankedPatternSet &patterns,
                   const ExperimentConfig &config);

struct ReproOptions {
  // Adds wall-clock crafting times to the attack artifacts (which makes them
  // differ between runs).
  bool timing = false;
  std::ostream *log = nullptr;
};

struct ReproSummary {
  std::array<EvalMetrics, 2> detector;    // by Architecture
  std::array<EvalMetrics, 2> classifier;  // by Architecture
  std::vector<AttackReport> attacks;
  int ranked_patterns = 0;
  std::vector<std::string> rank_warnings;
  int sgea_candidates = 0;
  double sbd_train_accuracy = 0;
  // Detector-evading adversarial examples of the pipeline architecture and
  // how many of them the pipeline marks suspicious.
  int evading_examples = 0;
  int flagged_examples = 0;
  // Benign test samples and how many of them the SBD marks suspicious.
  int benign_test = 0;
  int benign_flagged = 0;
  int test_size = 0;
  int verdicts = 0;

  double ae_flag_rate() const;
  double benign_false_flag_rate() const;
};

std::string summary_json(const ReproSummary &summary);

// Runs every stage and writes the artifact tree under `out`:
//   config.ini, summary.json
//   corpus/{manifest,train,test}.json, corpus/graphs/<id>.json
//   features/{train,test}.csv
//   models/{detector,classifier}_{cnn,dnn}.bin, models/sbd.bin
//   metrics/{detector,classifier}_{cnn,dnn}.json
//   patterns/mined_<family>.json, patterns/sgea_candidates.json,
//   patterns/ranked.json
//   vectors/{train,test}.csv
//   attacks/<model>_<arch>_<mode>[_<strategy>].json, attacks/summary.csv
//   pipeline/verdicts.jsonl, pipeline/adversarial_verdicts.jsonl
ReproSummary run_repro(const ExperimentConfig &config, const std::filesystem::path &out,
                       const ReproOptions &options = {});

}  // namespace cfgsentry

#endif  // CFGSENTRY_EXPERIMENT_H_
