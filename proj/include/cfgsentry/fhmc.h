#ifndef CFGSENTRY_FHMC_H_
#define CFGSENTRY_FHMC_H_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cfgsentry/graph.h"
#include "cfgsentry/learn.h"
#include "cfgsentry/mining.h"

namespace cfgsentry {

class EncodingTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// containment[p][s] is nonzero when pattern p occurs in family sample s.
// Coverage of p is the sum over its samples of 1 / (patterns in that sample).
// Throws std::invalid_argument for a pattern that occurs in no sample.
std::vector<double> coverage(const std::vector<std::vector<std::uint8_t>> &containment);

struct RankConfig {
  int top_k = 100;
  // Minimum share of the family's training samples a pattern must occur in.
  double min_family_fraction = 0.05;
  // Maximum number of benign training samples a pattern may occur in.
  int max_benign = 10;
  // Node count, family frequency, coverage, benign rarity.
  std::array<double, 4> weights{0.25, 0.25, 0.25, 0.25};
};

struct RankedPattern {
  SampleClass family = SampleClass::kFamilyA;
  DfsCode code;
  Digraph graph;
  int node_count = 0;
  int family_frequency = 0;
  double coverage = 0;
  int benign_occurrences = 0;
  double rank_score = 0;
};

struct FamilyCandidates {
  SampleClass family;
  std::vector<Pattern> patterns;
};

struct RankedPatternSet {
  std::vector<SampleClass> families;
  // Global order P: family order, then rank.
  std::vector<RankedPattern> patterns;
  // Families that kept fewer than top_k patterns.
  std::vector<std::string> warnings;

  int size() const { return static_cast<int>(patterns.size()); }
};

// Recounts every candidate over the training corpus, drops those under the
// family floor or over the benign ceiling, scores the rest by the weighted
// sum of min-max normalized factors and keeps the best top_k per family
// (ties by DFS code).
RankedPatternSet rank_patterns(std::span<const FamilyCandidates> candidates,
                               std::span<const LabeledSample> train, const RankConfig &config);

// Bit i is set when pattern i occurs in the sample. Throws EncodingTimeout
// when the queries take longer than `timeout_seconds` (<= 0 disables it).
std::vector<std::uint8_t> encode(const Cfg &sample, const RankedPatternSet &patterns,
                                 double timeout_seconds = 60.0);

std::string serialize_ranked_set(const RankedPatternSet &set);
RankedPatternSet parse_ranked_set(std::string_view text);

// "id,p0,p1,..." followed by one 0/1 row per sample.
std::string pattern_vectors_csv(std::span<const std::string> ids,
                                std::span<const std::vector<std::uint8_t>> vectors);
void parse_pattern_vectors_csv(std::string_view text, std::vector<std::string> &ids,
                               std::vector<std::vector<std::uint8_t>> &vectors);

inline constexpr int kSbdBenign = 0;
inline constexpr int kSbdSuspicious = 1;

// Two-class CNN over pattern vectors (labels kSbdBenign / kSbdSuspicious).
Model train_sbd(std::span<const std::vector<std::uint8_t>> vectors, std::span<const int> labels,
                const TrainConfig &config);

enum class VerdictKind { kBenign, kMalware, kSuspicious };
enum class Stage { kDetector, kClassifier, kSbd };

std::string_view verdict_name(VerdictKind v);
std::string_view stage_name(Stage s);

struct PipelineVerdict {
  std::string id;
  VerdictKind kind = VerdictKind::kBenign;
  std::optional<SampleClass> family;
  // The stage that decided.
  Stage stage = Stage::kDetector;
  std::vector<double> detector_proba;
  std::vector<double> classifier_proba;
  std::vector<double> sbd_proba;
};

// Class probabilities of each stage: detector [benign, malware], classifier
// one per malware family in class order, sbd [benign, suspicious].
struct PipelineStages {
  std::function<std::vector<double>(const Cfg &)> detector;
  std::function<std::vector<double>(const Cfg &)> classifier;
  std::function<std::vector<double>(const Cfg &)> sbd;
};

// Stages backed by trained models. The references must outlive the result.
PipelineStages model_stages(const Model &detector, const Model &classifier, const Model &sbd,
                            const RankedPatternSet &patterns, double encode_timeout = 60.0);

// Detector first; malware goes to the family classifier, benign to the SBD.
PipelineVerdict classify_pipeline(const Cfg &sample, const PipelineStages &stages);

// One JSON object per line.
std::string verdict_json_line(const PipelineVerdict &v);

}  // namespace cfgsentry

#endif  // CFGSENTRY_FHMC_H_
