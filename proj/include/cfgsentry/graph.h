#ifndef CFGSENTRY_GRAPH_H_
#define CFGSENTRY_GRAPH_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cfgsentry {

using NodeId = std::int64_t;
using Label = std::int32_t;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Index-based labeled digraph. Adjacency lists are kept sorted, so the edge
// set has no duplicates and iteration order is deterministic.
class Digraph {
 public:
  Digraph() = default;
  explicit Digraph(std::vector<Label> labels);

  int add_node(Label label);
  // Returns false if the edge already exists.
  bool add_edge(int src, int dst);

  int size() const { return static_cast<int>(labels_.size()); }
  int num_edges() const { return num_edges_; }
  Label label(int v) const { return labels_[v]; }
  const std::vector<Label> &labels() const { return labels_; }
  void set_label(int v, Label label) { labels_[v] = label; }

  std::span<const int> out(int v) const { return out_[v]; }
  std::span<const int> in(int v) const { return in_[v]; }
  int out_degree(int v) const { return static_cast<int>(out_[v].size()); }
  int in_degree(int v) const { return static_cast<int>(in_[v].size()); }
  bool has_edge(int src, int dst) const;

  // Edges as (src, dst) index pairs in lexicographic order.
  std::vector<std::pair<int, int>> edges() const;

  bool weakly_connected() const;

  friend bool operator==(const Digraph &, const Digraph &) = default;

 private:
  std::vector<Label> labels_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
  int num_edges_ = 0;
};

struct Node {
  NodeId id = 0;
  Label label = 0;
  friend bool operator==(const Node &, const Node &) = default;
};

using Edge = std::pair<NodeId, NodeId>;

// Control-flow graph with a designated entry node and a non-empty exit set.
// Immutable after construction; the constructor enforces every invariant.
class Cfg {
 public:
  Cfg(std::vector<Node> nodes, std::vector<Edge> edges, NodeId entry,
      std::vector<NodeId> exits);

  // Wraps a digraph, using node indices as ids.
  static Cfg from_digraph(Digraph graph, int entry, std::vector<int> exits);

  int num_nodes() const { return graph_.size(); }
  int num_edges() const { return graph_.num_edges(); }

  const Digraph &graph() const { return graph_; }
  NodeId id(int index) const { return ids_[index]; }
  Label label(int index) const { return graph_.label(index); }
  // Throws GraphError if the id is not present.
  int index_of(NodeId id) const;

  NodeId entry() const { return ids_[entry_]; }
  int entry_index() const { return entry_; }
  // Exit ids in ascending order.
  std::vector<NodeId> exits() const;
  const std::vector<int> &exit_indices() const { return exits_; }

  // Nodes in document order.
  std::vector<Node> nodes() const;
  // Edges by id, sorted lexicographically.
  std::vector<Edge> edges() const;

  // Structural equality: same node set, edge set, entry and exits, regardless
  // of node ordering.
  friend bool operator==(const Cfg &a, const Cfg &b);

 private:
  Cfg() = default;
  void build_index();

  Digraph graph_;
  std::vector<NodeId> ids_;
  // (id, index) sorted by id.
  std::vector<std::pair<NodeId, int>> index_;
  int entry_ = 0;
  std::vector<int> exits_;
};

enum class SampleClass { kBenign = 0, kFamilyA = 1, kFamilyB = 2, kFamilyC = 3 };

inline constexpr int kNumSampleClasses = 4;

std::string_view class_name(SampleClass c);
// Accepts the names produced by class_name(). Throws std::invalid_argument.
SampleClass parse_class(std::string_view name);
inline bool is_malware(SampleClass c) { return c != SampleClass::kBenign; }

struct LabeledSample {
  std::string id;
  Cfg cfg;
  SampleClass cls;
};

}  // namespace cfgsentry

#endif  // CFGSENTRY_GRAPH_H_
