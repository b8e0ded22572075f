#include "cfgsentry/mining.h"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "cfgsentry/graph_io.h"
#include "json.hpp"

namespace cfgsentry {
namespace {

int pair_type(const Digraph &g, int a, int b) {
  return (g.has_edge(a, b) ? 1 : 0) | (g.has_edge(b, a) ? 2 : 0);
}

// Pattern edge types a host pair of type `t` can realize.
std::span<const int> subtypes(int t) {
  static constexpr int kOne[] = {1};
  static constexpr int kTwo[] = {2};
  static constexpr int kAll[] = {1, 2, 3};
  switch (t) {
    case 1:
      return kOne;
    case 2:
      return kTwo;
    case 3:
      return kAll;
  }
  return {};
}

struct EdgeLess {
  bool operator()(const DfsEdge &a, const DfsEdge &b) const { return dfs_less(a, b); }
};

void append_edge(Digraph &g, const DfsEdge &e) {
  if (e.forward()) g.add_node(e.to_label);
  if (e.from == e.to) {
    g.add_edge(e.from, e.from);
    return;
  }
  if (e.dir & 1) g.add_edge(e.from, e.to);
  if (e.dir & 2) g.add_edge(e.to, e.from);
}

std::vector<int> rightmost_path(const DfsCode &code) {
  int n = code.num_vertices();
  std::vector<int> path{n - 1};
  int current = n - 1;
  for (auto it = code.edges.rbegin(); it != code.edges.rend(); ++it) {
    if (it->forward() && it->to == current) {
      path.push_back(it->from);
      current = it->from;
    }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Greedy construction of the minimum DFS code of `g`. When `reference` is
// given, stops as soon as the minimum diverges from it and reports whether
// the reference is the minimum.
class MinCodeBuilder {
 public:
  explicit MinCodeBuilder(const Digraph &g) : g_(g), n_(g.size()) {
    for (int a = 0; a < n_; ++a) {
      if (g.has_edge(a, a)) ++total_edges_;
      for (int b = a + 1; b < n_; ++b)
        if (pair_type(g, a, b) != 0) ++total_edges_;
    }
  }

  DfsCode build() {
    DfsCode code;
    run(nullptr, &code);
    return code;
  }

  bool matches(const DfsCode &reference) { return run(&reference, nullptr); }

 private:
  struct State {
    std::vector<int> c2g;
    std::vector<int> g2c;
    std::vector<int> rmpath;
    std::vector<char> used;  // n x n, diagonal for self-loops
  };

  bool used(const State &s, int a, int b) const { return s.used[a * n_ + b]; }
  void mark(State &s, int a, int b) const {
    s.used[a * n_ + b] = 1;
    s.used[b * n_ + a] = 1;
  }

  bool run(const DfsCode *reference, DfsCode *out) {
    if (n_ == 0) throw GraphError("empty graph has no DFS code");
    if (!g_.weakly_connected()) throw GraphError("graph is not connected");
    if (total_edges_ == 0) {
      if (out) out->root_label = g_.label(0);
      if (reference)
        return reference->edges.empty() && reference->root_label == g_.label(0);
      return true;
    }
    if (reference && static_cast<int>(reference->edges.size()) != total_edges_)
      return false;

    std::vector<State> states;
    for (int v = 0; v < n_; ++v) {
      State s;
      s.c2g = {v};
      s.g2c.assign(n_, -1);
      s.g2c[v] = 0;
      s.rmpath = {0};
      s.used.assign(n_ * n_, 0);
      states.push_back(std::move(s));
    }

    for (int step = 0; step < total_edges_; ++step) {
      std::optional<DfsEdge> best;
      std::vector<State> next;
      for (const State &s : states) {
        std::vector<std::pair<DfsEdge, int>> cands;  // element, new host vertex
        candidates(s, cands);
        for (const auto &[e, w] : cands) {
          if (!best || dfs_less(e, *best)) {
            best = e;
            next.clear();
          }
          if (e == *best) next.push_back(advance(s, e, w));
        }
      }
      if (!best) throw GraphError("DFS code construction stalled");
      if (reference) {
        const DfsEdge &want = reference->edges[step];
        if (!(*best == want)) return false;
      }
      if (out) out->edges.push_back(*best);
      states = std::move(next);
    }
    return true;
  }

  // Minimal candidate elements of a state (several when forward ties exist).
  void candidates(const State &s, std::vector<std::pair<DfsEdge, int>> &out) const {
    const int rm = s.rmpath.back();
    const int a = s.c2g[rm];
    for (int j : s.rmpath) {
      if (j == rm) break;
      int b = s.c2g[j];
      int t = pair_type(g_, a, b);
      if (t != 0 && !used(s, a, b)) {
        out.push_back({{rm, j, g_.label(a), t, g_.label(b)}, -1});
        return;
      }
    }
    if (g_.has_edge(a, a) && !used(s, a, a)) {
      out.push_back({{rm, rm, g_.label(a), 0, g_.label(a)}, -1});
      return;
    }
    const int next_index = static_cast<int>(s.c2g.size());
    for (auto it = s.rmpath.rbegin(); it != s.rmpath.rend(); ++it) {
      const int i = *it;
      const int u = s.c2g[i];
      std::optional<DfsEdge> local;
      std::vector<int> hosts;
      auto consider = [&](int w) {
        if (s.g2c[w] >= 0) return;
        DfsEdge e{i, next_index, g_.label(u), pair_type(g_, u, w), g_.label(w)};
        if (!local || dfs_less(e, *local)) {
          local = e;
          hosts.clear();
        }
        if (e == *local && std::find(hosts.begin(), hosts.end(), w) == hosts.end())
          hosts.push_back(w);
      };
      for (int w : g_.out(u)) consider(w);
      for (int w : g_.in(u)) consider(w);
      if (local) {
        for (int w : hosts) out.push_back({*local, w});
        return;
      }
    }
  }

  State advance(const State &s, const DfsEdge &e, int w) const {
    State t = s;
    if (e.forward()) {
      const int u = s.c2g[e.from];
      t.c2g.push_back(w);
      t.g2c[w] = e.to;
      mark(t, u, w);
      auto pos = std::find(t.rmpath.begin(), t.rmpath.end(), e.from);
      t.rmpath.erase(pos + 1, t.rmpath.end());
      t.rmpath.push_back(e.to);
    } else {
      mark(t, s.c2g[e.from], s.c2g[e.to]);
    }
    return t;
  }

  const Digraph &g_;
  int n_;
  int total_edges_ = 0;
};

// Host graph with an undirected neighbor view for extension enumeration.
struct HostView {
  const Digraph *graph = nullptr;
  std::vector<std::vector<std::pair<int, int>>> nbrs;  // (w, type v->w)

  explicit HostView(const Digraph &g) : graph(&g), nbrs(g.size()) {
    for (int v = 0; v < g.size(); ++v) {
      std::vector<int> all(g.out(v).begin(), g.out(v).end());
      all.insert(all.end(), g.in(v).begin(), g.in(v).end());
      std::sort(all.begin(), all.end());
      all.erase(std::unique(all.begin(), all.end()), all.end());
      for (int w : all)
        if (w != v) nbrs[v].emplace_back(w, pair_type(g, v, w));
    }
  }
};

struct Embedding {
  int graph;
  std::vector<int> map;  // code vertex -> host vertex
};

// gSpan over directed labeled graphs. `visit` sees every frequent minimal
// code and decides whether its subtree is explored.
class Miner {
 public:
  using Visitor = std::function<bool(const DfsCode &, const Digraph &,
                                     const std::vector<int> &)>;

  Miner(std::span<const Digraph> graphs, std::vector<char> counted, int min_support,
        int max_nodes, Visitor visit)
      : counted_(std::move(counted)), min_support_(min_support),
        max_nodes_(max_nodes), visit_(std::move(visit)) {
    hosts_.reserve(graphs.size());
    for (const Digraph &g : graphs) hosts_.emplace_back(g);
  }

  void run() {
    std::map<Label, std::vector<Embedding>> roots;
    for (int gi = 0; gi < static_cast<int>(hosts_.size()); ++gi)
      for (int v = 0; v < hosts_[gi].graph->size(); ++v)
        roots[hosts_[gi].graph->label(v)].push_back({gi, {v}});
    for (auto &[label, embs] : roots) {
      std::vector<int> support;
      if (!frequent(embs, support)) continue;
      DfsCode code;
      code.root_label = label;
      Digraph pattern;
      pattern.add_node(label);
      if (visit_(code, pattern, support)) extend(code, pattern, embs);
    }
  }

 private:
  bool frequent(const std::vector<Embedding> &embs, std::vector<int> &support) const {
    support.clear();
    int counted = 0;
    for (const Embedding &e : embs) {
      if (support.empty() || support.back() != e.graph) {
        support.push_back(e.graph);
        if (counted_[e.graph]) ++counted;
      }
    }
    return counted >= min_support_;
  }

  void extend(DfsCode &code, const Digraph &pattern, const std::vector<Embedding> &embs) {
    const int n = pattern.size();
    const std::vector<int> rmpath = code.edges.empty() ? std::vector<int>{0}
                                                       : rightmost_path(code);
    const int rm = rmpath.back();
    std::map<DfsEdge, std::vector<Embedding>, EdgeLess> ext;

    for (const Embedding &emb : embs) {
      const HostView &host = hosts_[emb.graph];
      const Digraph &h = *host.graph;
      const int hrm = emb.map[rm];
      for (int j : rmpath) {
        if (j == rm) break;
        if (pattern.has_edge(rm, j) || pattern.has_edge(j, rm)) continue;
        int t = pair_type(h, hrm, emb.map[j]);
        for (int s : subtypes(t))
          ext[{rm, j, pattern.label(rm), s, pattern.label(j)}].push_back(emb);
      }
      if (!pattern.has_edge(rm, rm) && h.has_edge(hrm, hrm))
        ext[{rm, rm, pattern.label(rm), 0, pattern.label(rm)}].push_back(emb);
      if (n >= max_nodes_) continue;
      for (int i : rmpath) {
        for (const auto &[w, t] : host.nbrs[emb.map[i]]) {
          if (std::find(emb.map.begin(), emb.map.end(), w) != emb.map.end()) continue;
          for (int s : subtypes(t)) {
            Embedding next{emb.graph, emb.map};
            next.map.push_back(w);
            ext[{i, n, pattern.label(i), s, h.label(w)}].push_back(std::move(next));
          }
        }
      }
    }

    std::vector<int> support;
    for (auto &[e, list] : ext) {
      if (!frequent(list, support)) continue;
      code.edges.push_back(e);
      if (MinCodeBuilder(code.to_graph()).matches(code)) {
        Digraph grown = pattern;
        append_edge(grown, e);
        if (visit_(code, grown, support)) extend(code, grown, list);
      }
      code.edges.pop_back();
    }
  }

  std::vector<HostView> hosts_;
  std::vector<char> counted_;
  int min_support_;
  int max_nodes_;
  Visitor visit_;
};

void check_sizes(int min_support, int min_nodes, int max_nodes) {
  if (min_support < 1) throw std::invalid_argument("min_support must be >= 1");
  if (min_nodes < 1 || max_nodes < min_nodes)
    throw std::invalid_argument("need 1 <= min_nodes <= max_nodes");
}

bool pattern_order(const Pattern &a, const Pattern &b) {
  if (a.node_count() != b.node_count()) return a.node_count() < b.node_count();
  return compare_codes(a.code, b.code) < 0;
}

}  // namespace

bool dfs_less(const DfsEdge &a, const DfsEdge &b) {
  if (a.from == b.from && a.to == b.to)
    return std::tie(a.from_label, a.dir, a.to_label) <
           std::tie(b.from_label, b.dir, b.to_label);
  const bool af = a.forward();
  const bool bf = b.forward();
  if (af && bf) return a.to != b.to ? a.to < b.to : a.from > b.from;
  if (!af && !bf) return a.from != b.from ? a.from < b.from : a.to < b.to;
  if (!af && bf) return a.from < b.to;
  return a.to <= b.from;
}

int DfsCode::num_vertices() const {
  int n = 1;
  for (const DfsEdge &e : edges) n = std::max({n, e.from + 1, e.to + 1});
  return n;
}

Digraph DfsCode::to_graph() const {
  Digraph g;
  g.add_node(edges.empty() ? root_label : edges.front().from_label);
  for (const DfsEdge &e : edges) append_edge(g, e);
  return g;
}

std::string DfsCode::to_string() const {
  if (edges.empty()) return "[" + std::to_string(root_label) + "]";
  std::string s;
  for (const DfsEdge &e : edges) {
    s += '(';
    s += std::to_string(e.from) + ',' + std::to_string(e.to) + ',' +
         std::to_string(e.from_label) + ',' + std::to_string(e.dir) + ',' +
         std::to_string(e.to_label);
    s += ')';
  }
  return s;
}

DfsCode DfsCode::parse(std::string_view text) {
  auto fail = [&]() -> DfsCode {
    throw GraphError("malformed DFS code '" + std::string(text) + "'");
  };
  auto read_int = [&](size_t &pos, int &value) {
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec != std::errc()) return false;
    pos = ptr - text.data();
    return true;
  };
  DfsCode code;
  size_t pos = 0;
  if (text.size() >= 3 && text.front() == '[') {
    ++pos;
    if (!read_int(pos, code.root_label) || pos + 1 != text.size() || text[pos] != ']')
      return fail();
    return code;
  }
  while (pos < text.size()) {
    if (text[pos] != '(') return fail();
    ++pos;
    int fields[5];
    for (int k = 0; k < 5; ++k) {
      if (!read_int(pos, fields[k])) return fail();
      char sep = k < 4 ? ',' : ')';
      if (pos >= text.size() || text[pos] != sep) return fail();
      ++pos;
    }
    code.edges.push_back({fields[0], fields[1], fields[2], fields[3], fields[4]});
  }
  if (code.edges.empty()) return fail();
  // Structural validity: forward edges introduce vertices in order.
  int n = 1;
  for (const DfsEdge &e : code.edges) {
    if (e.forward()) {
      if (e.to != n || e.from >= n) return fail();
      ++n;
    } else if (e.from >= n || e.to < 0) {
      return fail();
    }
    if (e.from == e.to ? e.dir != 0 : (e.dir < 1 || e.dir > 3)) return fail();
  }
  return code;
}

std::strong_ordering compare_codes(const DfsCode &a, const DfsCode &b) {
  if (a.edges.empty() || b.edges.empty()) {
    if (a.edges.empty() && b.edges.empty()) return a.root_label <=> b.root_label;
    return a.edges.empty() ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  size_t n = std::min(a.edges.size(), b.edges.size());
  for (size_t i = 0; i < n; ++i) {
    if (dfs_less(a.edges[i], b.edges[i])) return std::strong_ordering::less;
    if (dfs_less(b.edges[i], a.edges[i])) return std::strong_ordering::greater;
  }
  return a.edges.size() <=> b.edges.size();
}

DfsCode canonical_dfs_code(const Digraph &g) { return MinCodeBuilder(g).build(); }

bool is_min_code(const DfsCode &code) {
  return MinCodeBuilder(code.to_graph()).matches(code);
}

std::vector<Pattern> gspan_mine(std::span<const Digraph> corpus, int min_support,
                                int min_nodes, int max_nodes) {
  if (corpus.empty()) throw std::invalid_argument("cannot mine an empty corpus");
  check_sizes(min_support, min_nodes, max_nodes);
  std::vector<Pattern> result;
  Miner miner(corpus, std::vector<char>(corpus.size(), 1), min_support, max_nodes,
              [&](const DfsCode &code, const Digraph &graph,
                  const std::vector<int> &support) {
                if (graph.size() >= min_nodes)
                  result.push_back({code, graph, support, {}, 0});
                return true;
              });
  miner.run();
  std::sort(result.begin(), result.end(), pattern_order);
  return result;
}

std::int64_t cork_quality(std::int64_t pos_support, std::int64_t neg_support,
                          std::int64_t pos_total, std::int64_t neg_total) {
  return -(pos_support * neg_support +
           (pos_total - pos_support) * (neg_total - neg_support));
}

std::int64_t cork_upper_bound(std::int64_t pos_support, std::int64_t neg_support,
                              std::int64_t pos_total, std::int64_t neg_total) {
  // Supergraphs can only shrink both support sets; the bilinear objective
  // peaks at a corner of [0, pos_support] x [0, neg_support].
  return std::max({cork_quality(pos_support, 0, pos_total, neg_total),
                   cork_quality(0, neg_support, pos_total, neg_total),
                   cork_quality(pos_support, neg_support, pos_total, neg_total),
                   cork_quality(0, 0, pos_total, neg_total)});
}

std::vector<Pattern> select_discriminative(std::span<const LabeledSample> corpus,
                                           SampleClass target,
                                           const DiscriminativeConfig &config) {
  check_sizes(config.min_support, config.min_nodes, config.max_nodes);
  std::vector<Digraph> graphs;
  std::vector<char> positive;
  std::int64_t pos_total = 0;
  for (const auto &s : corpus) {
    graphs.push_back(s.cfg.graph());
    positive.push_back(s.cls == target);
    pos_total += s.cls == target;
  }
  if (pos_total == 0)
    throw std::invalid_argument("target class '" + std::string(class_name(target)) +
                                "' absent from corpus");
  const std::int64_t neg_total = static_cast<std::int64_t>(corpus.size()) - pos_total;

  std::vector<Pattern> kept;
  // Qualities of the current best top_n patterns (min-heap).
  std::priority_queue<std::int64_t, std::vector<std::int64_t>, std::greater<>> best;
  const auto top_n = static_cast<size_t>(config.top_n);

  Miner miner(graphs, positive, config.min_support, config.max_nodes,
              [&](const DfsCode &code, const Digraph &graph,
                  const std::vector<int> &support) {
                std::int64_t pos = 0;
                for (int gi : support) pos += positive[gi];
                std::int64_t neg = static_cast<std::int64_t>(support.size()) - pos;
                if (graph.size() >= config.min_nodes) {
                  Pattern p{code, graph, support, {}, cork_quality(pos, neg, pos_total, neg_total)};
                  for (int gi : support) ++p.class_support[static_cast<int>(corpus[gi].cls)];
                  if (top_n == 0 || best.size() < top_n || p.quality >= best.top()) {
                    if (top_n > 0) {
                      best.push(p.quality);
                      if (best.size() > top_n) best.pop();
                    }
                    kept.push_back(std::move(p));
                  }
                }
                if (!config.prune || top_n == 0 || best.size() < top_n) return true;
                return cork_upper_bound(pos, neg, pos_total, neg_total) >= best.top();
              });
  miner.run();

  std::sort(kept.begin(), kept.end(), [](const Pattern &a, const Pattern &b) {
    if (a.quality != b.quality) return a.quality > b.quality;
    return pattern_order(a, b);
  });
  if (top_n > 0 && kept.size() > top_n) kept.resize(top_n);
  return kept;
}

Cfg pattern_cfg(const Digraph &pattern) {
  std::vector<int> exits;
  for (int v = 0; v < pattern.size(); ++v) {
    auto out = pattern.out(v);
    if (std::all_of(out.begin(), out.end(), [v](int w) { return w == v; }))
      exits.push_back(v);
  }
  if (exits.empty()) exits.push_back(pattern.size() - 1);
  return Cfg::from_digraph(pattern, 0, std::move(exits));
}

std::string serialize_patterns(std::span<const Pattern> patterns) {
  using json = nlohmann::json;
  json list = json::array();
  for (const Pattern &p : patterns) {
    json support = json::object();
    for (int c = 0; c < kNumSampleClasses; ++c)
      support[std::string(class_name(static_cast<SampleClass>(c)))] = p.class_support[c];
    list.push_back({{"dfs_code", p.code.to_string()},
                    {"graph", json::parse(serialize_graph(pattern_cfg(p.graph)))},
                    {"support", std::move(support)},
                    {"quality", p.quality}});
  }
  return list.dump(1) + "\n";
}

std::vector<Pattern> parse_patterns(std::string_view text) {
  using json = nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw GraphError(std::string("malformed pattern file: ") + e.what());
  }
  if (!doc.is_array()) throw GraphError("pattern file must be a JSON array");
  std::vector<Pattern> result;
  for (const json &item : doc) {
    if (!item.is_object() || !item.contains("dfs_code") || !item["dfs_code"].is_string())
      throw GraphError("pattern entries need a dfs_code string");
    Pattern p;
    p.code = DfsCode::parse(item["dfs_code"].get<std::string>());
    if (!is_min_code(p.code))
      throw GraphError("pattern code is not canonical: " + p.code.to_string());
    p.graph = p.code.to_graph();
    if (item.contains("graph") &&
        !(parse_graph(item["graph"].dump()) == pattern_cfg(p.graph)))
      throw GraphError("pattern graph disagrees with its code: " + p.code.to_string());
    if (item.contains("support") && item["support"].is_object()) {
      for (const auto &[name, count] : item["support"].items()) {
        try {
          p.class_support[static_cast<int>(parse_class(name))] = count.get<int>();
        } catch (const std::exception &e) {
          throw GraphError(std::string("bad pattern support: ") + e.what());
        }
      }
    }
    if (item.contains("quality")) p.quality = item["quality"].get<std::int64_t>();
    result.push_back(std::move(p));
  }
  return result;
}

}  // namespace cfgsentry
