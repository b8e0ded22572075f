// Slow reference implementations used to cross-check the library.
#ifndef CFGSENTRY_TESTS_ORACLES_H_
#define CFGSENTRY_TESTS_ORACLES_H_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "cfgsentry/graph.h"
#include "cfgsentry/learn.h"
#include "cfgsentry/util.h"

namespace cfgsentry::oracle {

// Random digraph; edges (including self-loops) drawn independently.
inline Digraph random_digraph(Rng &rng, int n, double p_edge, int num_labels,
                              double p_loop = 0.0) {
  Digraph g;
  for (int i = 0; i < n; ++i) g.add_node(static_cast<Label>(rng.below(num_labels)));
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (rng.bernoulli(u == v ? p_loop : p_edge)) g.add_edge(u, v);
  return g;
}

// Random weakly connected digraph: a random spanning tree plus extra edges.
inline Digraph random_connected(Rng &rng, int n, double p_extra, int num_labels,
                                double p_loop = 0.0) {
  Digraph g;
  for (int i = 0; i < n; ++i) g.add_node(static_cast<Label>(rng.below(num_labels)));
  for (int v = 1; v < n; ++v) {
    int u = static_cast<int>(rng.below(v));
    if (rng.bernoulli(0.5)) g.add_edge(u, v); else g.add_edge(v, u);
  }
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (rng.bernoulli(u == v ? p_loop : p_extra)) g.add_edge(u, v);
  return g;
}

// Relabels node indices by `perm` (new index of old node i is perm[i]).
inline Digraph permute(const Digraph &g, const std::vector<int> &perm) {
  std::vector<Label> labels(g.size());
  for (int i = 0; i < g.size(); ++i) labels[perm[i]] = g.label(i);
  Digraph h(labels);
  for (auto [u, v] : g.edges()) h.add_edge(perm[u], perm[v]);
  return h;
}

// Counts injective, label-preserving maps sending every pattern edge to a
// host edge, by trying every assignment.
inline std::uint64_t brute_match_count(const Digraph &p, const Digraph &h,
                                       std::uint64_t limit = UINT64_MAX) {
  const int n = p.size();
  if (n > h.size()) return 0;
  std::vector<int> map(n, -1);
  std::vector<char> used(h.size(), 0);
  std::uint64_t count = 0;
  std::function<void(int)> rec = [&](int i) {
    if (count >= limit) return;
    if (i == n) {
      for (auto [u, v] : p.edges())
        if (!h.has_edge(map[u], map[v])) return;
      ++count;
      return;
    }
    for (int x = 0; x < h.size(); ++x) {
      if (used[x] || h.label(x) != p.label(i)) continue;
      used[x] = 1;
      map[i] = x;
      rec(i + 1);
      used[x] = 0;
    }
  };
  rec(0);
  return count;
}

inline bool brute_is_subgraph(const Digraph &p, const Digraph &h) {
  return brute_match_count(p, h, 1) > 0;
}

// Canonical string: minimum over all label-respecting orderings of the
// serialized (labels, adjacency matrix).
inline std::string brute_canonical(const Digraph &g) {
  const int n = g.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return g.label(a) < g.label(b); });
  std::string prefix;
  for (int v : order) prefix += std::to_string(g.label(v)) + ",";
  std::string best;
  bool first = true;
  // Permute only within runs of equal labels.
  std::vector<std::pair<int, int>> runs;
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && g.label(order[j]) == g.label(order[i])) ++j;
    runs.emplace_back(i, j);
    i = j;
  }
  std::function<void(size_t)> rec = [&](size_t r) {
    if (r == runs.size()) {
      std::string s;
      s.reserve(n * n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) s.push_back(g.has_edge(order[a], order[b]) ? '1' : '0');
      if (first || s < best) best = s, first = false;
      return;
    }
    auto [lo, hi] = runs[r];
    std::sort(order.begin() + lo, order.begin() + hi);
    do {
      rec(r + 1);
    } while (std::next_permutation(order.begin() + lo, order.begin() + hi));
  };
  rec(0);
  return prefix + "|" + best;
}

// Every connected non-induced subgraph of every corpus graph, keyed by
// canonical form, with the set of graphs containing it.
inline std::map<std::string, std::set<int>> brute_mine(const std::vector<Digraph> &corpus,
                                                       int min_support, int min_nodes,
                                                       int max_nodes) {
  std::map<std::string, std::set<int>> found;
  for (int gi = 0; gi < static_cast<int>(corpus.size()); ++gi) {
    const Digraph &g = corpus[gi];
    const int n = g.size();
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      const int k = std::popcount(mask);
      if (k < min_nodes || k > max_nodes) continue;
      std::vector<int> verts;
      for (int v = 0; v < n; ++v)
        if (mask >> v & 1) verts.push_back(v);
      std::vector<std::pair<int, int>> inner;
      for (auto [u, v] : g.edges())
        if ((mask >> u & 1) && (mask >> v & 1)) inner.emplace_back(u, v);
      if (inner.size() > 20) continue;
      for (std::uint32_t emask = 0; emask < (1u << inner.size()); ++emask) {
        std::vector<int> local(n, -1);
        std::vector<Label> labels;
        for (int v : verts) {
          local[v] = static_cast<int>(labels.size());
          labels.push_back(g.label(v));
        }
        Digraph sub(labels);
        for (size_t e = 0; e < inner.size(); ++e)
          if (emask >> e & 1) sub.add_edge(local[inner[e].first], local[inner[e].second]);
        if (!sub.weakly_connected()) continue;
        found[brute_canonical(sub)].insert(gi);
      }
    }
  }
  for (auto it = found.begin(); it != found.end();)
    it = static_cast<int>(it->second.size()) < min_support ? found.erase(it) : std::next(it);
  return found;
}

// All-pairs distances by Floyd-Warshall; -1 marks unreachable.
inline std::vector<std::vector<int>> floyd_warshall(const Digraph &g) {
  const int n = g.size();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int v = 0; v < n; ++v) d[v][v] = 0;
  for (auto [u, v] : g.edges())
    if (u != v) d[u][v] = 1;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (auto &row : d)
    for (int &x : row)
      if (x >= inf) x = -1;
  return d;
}

// Betweenness by enumerating every shortest s-t path explicitly.
inline std::vector<double> naive_betweenness(const Digraph &g) {
  const int n = g.size();
  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;
  auto d = floyd_warshall(g);
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      if (s == t || d[s][t] < 0) continue;
      std::vector<std::vector<int>> paths;
      std::vector<int> path{s};
      std::function<void(int)> walk = [&](int u) {
        if (u == t) {
          paths.push_back(path);
          return;
        }
        if (static_cast<int>(path.size()) - 1 >= d[s][t]) return;
        for (int w : g.out(u)) {
          if (std::find(path.begin(), path.end(), w) != path.end()) continue;
          path.push_back(w);
          walk(w);
          path.pop_back();
        }
      };
      walk(s);
      std::vector<int> through(n, 0);
      int total = 0;
      for (const auto &p : paths) {
        if (static_cast<int>(p.size()) - 1 != d[s][t]) continue;
        ++total;
        for (size_t i = 1; i + 1 < p.size(); ++i) ++through[p[i]];
      }
      for (int v = 0; v < n; ++v)
        if (v != s && v != t && total > 0) bc[v] += static_cast<double>(through[v]) / total;
    }
  }
  for (double &x : bc) x /= static_cast<double>((n - 1) * (n - 2));
  return bc;
}

struct GradientCheck {
  // Per-tensor ||a - n|| / max(||a|| + ||n||, 1e-12).
  std::vector<double> relative_error;
  double worst = 0;
  // Entries compared, per tensor.
  std::vector<std::size_t> checked;
  // Entries whose +-h step leaves the current linear region (a ReLU flips or
  // a max-pool winner changes); the central difference is not a derivative
  // estimate there, so they are excluded.
  std::size_t crossed = 0;

  // Every tensor had more entries compared than excluded overall.
  bool well_covered() const {
    std::size_t total = 0;
    for (std::size_t c : checked) {
      if (c == 0) return false;
      total += c;
    }
    return total > crossed;
  }
};

// Compares analytic gradients with central differences. Tensors with more
// than `max_entries` parameters are checked on an evenly spaced subset.
inline GradientCheck gradient_check(Model &m, const std::vector<std::vector<double>> &batch,
                                    const std::vector<int> &labels, double h,
                                    std::size_t max_entries) {
  std::vector<std::vector<double>> analytic;
  loss_and_gradients(m, batch, labels, &analytic);
  const auto signature = activation_signature(m, batch);
  GradientCheck result;
  for (size_t t = 0; t < m.params().size(); ++t) {
    auto &tensor = m.params()[t];
    const size_t step = std::max<size_t>(1, tensor.size() / max_entries);
    double diff = 0, na = 0, nn = 0;
    std::size_t compared = 0;
    for (size_t k = 0; k < tensor.size(); k += step) {
      const double saved = tensor[k];
      tensor[k] = saved + h;
      const double up = loss_and_gradients(m, batch, labels, nullptr);
      const bool up_same = activation_signature(m, batch) == signature;
      tensor[k] = saved - h;
      const double down = loss_and_gradients(m, batch, labels, nullptr);
      const bool down_same = activation_signature(m, batch) == signature;
      tensor[k] = saved;
      if (!up_same || !down_same) {
        ++result.crossed;
        continue;
      }
      ++compared;
      const double numeric = (up - down) / (2 * h);
      diff += (numeric - analytic[t][k]) * (numeric - analytic[t][k]);
      na += analytic[t][k] * analytic[t][k];
      nn += numeric * numeric;
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-12);
    result.relative_error.push_back(rel);
    result.checked.push_back(compared);
    result.worst = std::max(result.worst, rel);
  }
  return result;
}

}  // namespace cfgsentry::oracle

#endif  // CFGSENTRY_TESTS_ORACLES_H_
