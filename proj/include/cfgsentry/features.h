#ifndef CFGSENTRY_FEATURES_H_
#define CFGSENTRY_FEATURES_H_

#include <array>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cfgsentry/graph.h"

namespace cfgsentry {

struct SummaryStats {
  double min = 0, max = 0, median = 0, mean = 0, std = 0;
};

// Population standard deviation; even-length medians average the two middle
// order statistics. Throws std::invalid_argument on an empty input.
SummaryStats summary_stats(std::span<const double> values);

// |E| / (|V| (|V| - 1)), or 0 for single-node graphs.
double density(const Cfg &g);

// (in + out degree) / (|V| - 1); a self-loop counts once in each direction.
std::vector<double> degree_centrality(const Cfg &g);

// Reachability-scaled closeness over outgoing BFS distances:
//   (r / (|V| - 1)) * (r / sum of distances), r = nodes reachable from v.
std::vector<double> closeness_centrality(const Cfg &g);

// Directed Brandes betweenness, normalized by (|V| - 1)(|V| - 2).
std::vector<double> betweenness_centrality(const Cfg &g);

// Statistics over all finite d(u, v), u != v. Zeros when no pair is connected.
SummaryStats shortest_path_stats(const Cfg &g);

inline constexpr int kNumFeatures = 23;

// Layout: betweenness[5], closeness[5], degree[5], shortest_path[5], density,
// edge_count, node_count. Each 5-block is (min, max, median, mean, std).
using FeatureVector = std::array<double, kNumFeatures>;

FeatureVector extract_features(const Cfg &g);

const std::array<std::string, kNumFeatures> &feature_names();

// CSV with a header row; sample id in column 0.
void write_feature_csv(std::ostream &out, std::span<const std::string> ids,
                       std::span<const FeatureVector> rows);

}  // namespace cfgsentry

#endif  // CFGSENTRY_FEATURES_H_
