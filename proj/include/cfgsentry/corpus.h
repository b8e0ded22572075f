#ifndef CFGSENTRY_CORPUS_H_
#define CFGSENTRY_CORPUS_H_

#include <array>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cfgsentry/graph.h"

namespace cfgsentry {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LabelMode { kDegree, kUniform };

// Shape of the random filler code for one class. Filler is a chain of basic
// blocks with fall-through edges plus forward branches, multi-way switches
// and loop back-edges.
struct ClassProfile {
  int count = 1;
  // Total node count, drawn log-uniformly from [min_nodes, max_nodes].
  int min_nodes = 10;
  int max_nodes = 40;
  double branch_prob = 0.3;
  double switch_prob = 0.02;
  double back_prob = 0.08;
  // Maximum distance of a branch or back-edge target, in blocks.
  int span = 6;
};

struct CorpusConfig {
  std::uint64_t seed = 1;
  // Indexed by SampleClass.
  std::array<ClassProfile, kNumSampleClasses> classes;
  int motifs_per_family = 2;
  int motif_min_nodes = 5;
  int motif_max_nodes = 7;
  // Extra-edge probability inside a motif.
  double motif_density = 0.35;
  // Each motif is planted independently with this probability; a sample that
  // draws none gets its family's first motif.
  double motif_prob = 0.9;
  LabelMode label_mode = LabelMode::kDegree;

  // Throws ConfigError when a count, probability or size range is invalid.
  void validate() const;
};

CorpusConfig default_corpus_config();

// A family motif: the planted subgraph (labels as they appear in every
// sample) and its entry and exit vertices.
struct Motif {
  Digraph graph;
  int entry = 0;
  std::vector<int> exits;
};

// Motifs of one family, deterministic in the config seed.
std::vector<Motif> family_motifs(const CorpusConfig &config, SampleClass family);

// Samples in class order, ids "<class>_<index>". Deterministic given the seed.
std::vector<LabeledSample> generate_corpus(const CorpusConfig &config);

// Stratified split: round(fraction * n) samples of each class go to train,
// keeping at least one on each side. Both halves preserve corpus order.
// Throws std::invalid_argument for a fraction outside (0, 1) or a class with
// fewer than two samples.
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split_corpus(
    const std::vector<LabeledSample> &corpus, double train_fraction, std::uint64_t seed);

}  // namespace cfgsentry

#endif  // CFGSENTRY_CORPUS_H_
