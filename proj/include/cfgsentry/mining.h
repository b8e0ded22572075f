#ifndef CFGSENTRY_MINING_H_
#define CFGSENTRY_MINING_H_

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfgsentry/graph.h"

namespace cfgsentry {

// One DFS-code entry. Vertices are numbered in discovery order; `from < to`
// is a forward (tree) edge, `from >= to` a backward edge, `from == to` a
// self-loop. `dir` is relative to the traversal: 1 means from -> to, 2 means
// to -> from, 3 means both; self-loops use 0.
struct DfsEdge {
  int from = 0;
  int to = 0;
  Label from_label = 0;
  int dir = 0;
  Label to_label = 0;

  bool forward() const { return from < to; }
  friend bool operator==(const DfsEdge &, const DfsEdge &) = default;
};

// gSpan's DFS lexicographic order.
bool dfs_less(const DfsEdge &a, const DfsEdge &b);

struct DfsCode {
  // Only meaningful for the single-vertex, edgeless graph.
  Label root_label = 0;
  std::vector<DfsEdge> edges;

  int num_vertices() const;
  Digraph to_graph() const;
  std::string to_string() const;
  static DfsCode parse(std::string_view text);

  friend bool operator==(const DfsCode &a, const DfsCode &b) {
    return a.edges == b.edges && (!a.edges.empty() || a.root_label == b.root_label);
  }
};

// Three-way comparison in DFS lexicographic order (edgeless codes first).
std::strong_ordering compare_codes(const DfsCode &a, const DfsCode &b);

// Minimum DFS code. Throws GraphError for empty or disconnected input.
DfsCode canonical_dfs_code(const Digraph &g);

bool is_min_code(const DfsCode &code);

struct Pattern {
  DfsCode code;
  // Vertices in DFS discovery order of `code`.
  Digraph graph;
  // Indices into the mined corpus, ascending.
  std::vector<int> supporting;
  std::array<int, kNumSampleClasses> class_support{};
  std::int64_t quality = 0;

  int node_count() const { return graph.size(); }
  int support() const { return static_cast<int>(supporting.size()); }
};

// Every connected subgraph (up to isomorphism, non-induced) with a node count
// in [min_nodes, max_nodes] that embeds into at least `min_support` corpus
// graphs. Sorted by (node_count, code).
std::vector<Pattern> gspan_mine(std::span<const Digraph> corpus, int min_support,
                                int min_nodes, int max_nodes);

// Negated number of cross-class pairs the pattern leaves indistinguishable:
// -(|D+_S| |D-_S| + (|D+| - |D+_S|)(|D-| - |D-_S|)).
std::int64_t cork_quality(std::int64_t pos_support, std::int64_t neg_support,
                          std::int64_t pos_total, std::int64_t neg_total);

// Best quality any supergraph of a pattern with the given supports can reach.
std::int64_t cork_upper_bound(std::int64_t pos_support, std::int64_t neg_support,
                              std::int64_t pos_total, std::int64_t neg_total);

struct DiscriminativeConfig {
  // Absolute support threshold inside the target class.
  int min_support = 1;
  int min_nodes = 1;
  int max_nodes = 8;
  // Number of patterns to keep; 0 keeps every frequent pattern.
  int top_n = 0;
  // Disable to get the exhaustive reference search.
  bool prune = true;
};

// One-vs-rest CORK selection for `target`. Result sorted by (quality desc,
// node_count asc, code). Throws std::invalid_argument if no sample has the
// target class.
std::vector<Pattern> select_discriminative(std::span<const LabeledSample> corpus,
                                           SampleClass target,
                                           const DiscriminativeConfig &config);

// Pattern graph as a Cfg: entry is DFS vertex 0, exits are vertices without
// successors other than themselves (the last vertex if there are none).
Cfg pattern_cfg(const Digraph &pattern);

// JSON array of {dfs_code, graph, support: {class: count}, quality}.
std::string serialize_patterns(std::span<const Pattern> patterns);
// Re-derives graphs from the stored codes and checks they are canonical.
std::vector<Pattern> parse_patterns(std::string_view text);

}  // namespace cfgsentry

#endif  // CFGSENTRY_MINING_H_
