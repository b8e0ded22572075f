#include "cfgsentry/graph.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cfgsentry {

Digraph::Digraph(std::vector<Label> labels)
    : labels_(std::move(labels)), out_(labels_.size()), in_(labels_.size()) {}

int Digraph::add_node(Label label) {
  labels_.push_back(label);
  out_.emplace_back();
  in_.emplace_back();
  return size() - 1;
}

bool Digraph::add_edge(int src, int dst) {
  auto &out = out_[src];
  auto it = std::lower_bound(out.begin(), out.end(), dst);
  if (it != out.end() && *it == dst) return false;
  out.insert(it, dst);
  auto &in = in_[dst];
  in.insert(std::lower_bound(in.begin(), in.end(), src), src);
  ++num_edges_;
  return true;
}

bool Digraph::has_edge(int src, int dst) const {
  const auto &out = out_[src];
  return std::binary_search(out.begin(), out.end(), dst);
}

std::vector<std::pair<int, int>> Digraph::edges() const {
  std::vector<std::pair<int, int>> result;
  result.reserve(num_edges_);
  for (int u = 0; u < size(); ++u)
    for (int v : out_[u]) result.emplace_back(u, v);
  return result;
}

bool Digraph::weakly_connected() const {
  if (size() == 0) return false;
  std::vector<char> seen(size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (const auto *adj : {&out_[u], &in_[u]}) {
      for (int v : *adj) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
  }
  return count == size();
}

Cfg::Cfg(std::vector<Node> nodes, std::vector<Edge> edges, NodeId entry,
         std::vector<NodeId> exits) {
  if (nodes.empty()) throw GraphError("graph has no nodes");
  std::vector<Label> labels;
  labels.reserve(nodes.size());
  ids_.reserve(nodes.size());
  for (const Node &n : nodes) {
    if (n.id < 0) throw GraphError("negative node id " + std::to_string(n.id));
    if (n.label < 0)
      throw GraphError("negative label on node " + std::to_string(n.id));
    ids_.push_back(n.id);
    labels.push_back(n.label);
  }
  graph_ = Digraph(std::move(labels));
  build_index();

  for (const auto &[src, dst] : edges) {
    int s = index_of(src);
    int d = index_of(dst);
    if (!graph_.add_edge(s, d))
      throw GraphError("duplicate edge " + std::to_string(src) + " -> " +
                       std::to_string(dst));
  }
  entry_ = index_of(entry);
  if (exits.empty()) throw GraphError("graph has no exit nodes");
  for (NodeId x : exits) exits_.push_back(index_of(x));
  std::sort(exits_.begin(), exits_.end());
  if (std::adjacent_find(exits_.begin(), exits_.end()) != exits_.end())
    throw GraphError("duplicate exit node");
}

Cfg Cfg::from_digraph(Digraph graph, int entry, std::vector<int> exits) {
  if (graph.size() == 0) throw GraphError("graph has no nodes");
  if (entry < 0 || entry >= graph.size())
    throw GraphError("entry index out of range");
  if (exits.empty()) throw GraphError("graph has no exit nodes");
  std::sort(exits.begin(), exits.end());
  if (std::adjacent_find(exits.begin(), exits.end()) != exits.end())
    throw GraphError("duplicate exit node");
  for (int x : exits)
    if (x < 0 || x >= graph.size()) throw GraphError("exit index out of range");
  Cfg cfg;
  cfg.graph_ = std::move(graph);
  cfg.ids_.resize(cfg.graph_.size());
  for (int i = 0; i < cfg.graph_.size(); ++i) cfg.ids_[i] = i;
  cfg.build_index();
  cfg.entry_ = entry;
  cfg.exits_ = std::move(exits);
  return cfg;
}

void Cfg::build_index() {
  index_.clear();
  index_.reserve(ids_.size());
  for (int i = 0; i < static_cast<int>(ids_.size()); ++i)
    index_.emplace_back(ids_[i], i);
  std::sort(index_.begin(), index_.end());
  for (size_t i = 1; i < index_.size(); ++i)
    if (index_[i].first == index_[i - 1].first)
      throw GraphError("duplicate node id " + std::to_string(index_[i].first));
}

int Cfg::index_of(NodeId id) const {
  auto it = std::lower_bound(index_.begin(), index_.end(),
                             std::pair<NodeId, int>{id, -1});
  if (it == index_.end() || it->first != id)
    throw GraphError("reference to unknown node " + std::to_string(id));
  return it->second;
}

std::vector<NodeId> Cfg::exits() const {
  std::vector<NodeId> result;
  for (int x : exits_) result.push_back(ids_[x]);
  std::sort(result.begin(), result.end());
  return result;
}

std::vector<Node> Cfg::nodes() const {
  std::vector<Node> result;
  result.reserve(ids_.size());
  for (int i = 0; i < num_nodes(); ++i) result.push_back({ids_[i], label(i)});
  return result;
}

std::vector<Edge> Cfg::edges() const {
  std::vector<Edge> result;
  result.reserve(num_edges());
  for (const auto &[u, v] : graph_.edges()) result.emplace_back(ids_[u], ids_[v]);
  std::sort(result.begin(), result.end());
  return result;
}

bool operator==(const Cfg &a, const Cfg &b) {
  if (a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges())
    return false;
  if (a.entry() != b.entry() || a.exits() != b.exits()) return false;
  auto sorted_nodes = [](const Cfg &g) {
    auto nodes = g.nodes();
    std::sort(nodes.begin(), nodes.end(),
              [](const Node &x, const Node &y) { return x.id < y.id; });
    return nodes;
  };
  return sorted_nodes(a) == sorted_nodes(b) && a.edges() == b.edges();
}

std::string_view class_name(SampleClass c) {
  switch (c) {
    case SampleClass::kBenign:
      return "benign";
    case SampleClass::kFamilyA:
      return "family_a";
    case SampleClass::kFamilyB:
      return "family_b";
    case SampleClass::kFamilyC:
      return "family_c";
  }
  return "unknown";
}

SampleClass parse_class(std::string_view name) {
  for (int c = 0; c < kNumSampleClasses; ++c) {
    auto cls = static_cast<SampleClass>(c);
    if (class_name(cls) == name) return cls;
  }
  throw std::invalid_argument("unknown class '" + std::string(name) + "'");
}

}  // namespace cfgsentry
