#include "cfgsentry/features.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "cfgsentry/util.h"

namespace cfgsentry {
namespace {

// Unit-weight BFS distances from `source`; -1 marks unreachable nodes.
void bfs(const Digraph &g, int source, std::vector<int> &dist) {
  dist.assign(g.size(), -1);
  std::vector<int> queue;
  queue.reserve(g.size());
  dist[source] = 0;
  queue.push_back(source);
  for (size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    for (int v : g.out(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
}

}  // namespace

SummaryStats summary_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summary_stats of empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  SummaryStats s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sum = 0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(n);
  double sq = 0;
  for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(n));
  return s;
}

double density(const Cfg &g) {
  const double n = g.num_nodes();
  if (n <= 1) return 0.0;
  return g.num_edges() / (n * (n - 1));
}

std::vector<double> degree_centrality(const Cfg &g) {
  const int n = g.num_nodes();
  std::vector<double> result(n, 0.0);
  if (n == 1) return result;
  for (int v = 0; v < n; ++v)
    result[v] = (g.graph().in_degree(v) + g.graph().out_degree(v)) /
                static_cast<double>(n - 1);
  return result;
}

std::vector<double> closeness_centrality(const Cfg &g) {
  const int n = g.num_nodes();
  std::vector<double> result(n, 0.0);
  std::vector<int> dist;
  for (int v = 0; v < n; ++v) {
    bfs(g.graph(), v, dist);
    long reachable = 0;
    long total = 0;
    for (int u = 0; u < n; ++u) {
      if (u != v && dist[u] > 0) {
        ++reachable;
        total += dist[u];
      }
    }
    if (reachable == 0) continue;
    double r = static_cast<double>(reachable);
    result[v] = (r / (n - 1)) * (r / static_cast<double>(total));
  }
  return result;
}

std::vector<double> betweenness_centrality(const Cfg &g) {
  const Digraph &graph = g.graph();
  const int n = graph.size();
  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;

  std::vector<int> order;
  std::vector<int> dist(n);
  std::vector<double> sigma(n);
  std::vector<double> delta(n);
  std::vector<std::vector<int>> preds(n);
  for (int s = 0; s < n; ++s) {
    order.clear();
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto &p : preds) p.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    order.push_back(s);
    for (size_t head = 0; head < order.size(); ++head) {
      int u = order[head];
      for (int v : graph.out(u)) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          order.push_back(v);
        }
        if (dist[v] == dist[u] + 1) {
          sigma[v] += sigma[u];
          preds[v].push_back(u);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int w = *it;
      for (int u : preds[w]) delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
      if (w != s) bc[w] += delta[w];
    }
  }
  const double scale = 1.0 / (static_cast<double>(n - 1) * (n - 2));
  for (double &b : bc) b *= scale;
  return bc;
}

SummaryStats shortest_path_stats(const Cfg &g) {
  const int n = g.num_nodes();
  std::vector<double> samples;
  std::vector<int> dist;
  for (int u = 0; u < n; ++u) {
    bfs(g.graph(), u, dist);
    for (int v = 0; v < n; ++v)
      if (v != u && dist[v] > 0) samples.push_back(dist[v]);
  }
  if (samples.empty()) return {};
  return summary_stats(samples);
}

FeatureVector extract_features(const Cfg &g) {
  FeatureVector f{};
  auto put = [&f](int offset, const SummaryStats &s) {
    f[offset + 0] = s.min;
    f[offset + 1] = s.max;
    f[offset + 2] = s.median;
    f[offset + 3] = s.mean;
    f[offset + 4] = s.std;
  };
  put(0, summary_stats(betweenness_centrality(g)));
  put(5, summary_stats(closeness_centrality(g)));
  put(10, summary_stats(degree_centrality(g)));
  put(15, shortest_path_stats(g));
  f[20] = density(g);
  f[21] = g.num_edges();
  f[22] = g.num_nodes();
  return f;
}

const std::array<std::string, kNumFeatures> &feature_names() {
  static const std::array<std::string, kNumFeatures> names = [] {
    std::array<std::string, kNumFeatures> n;
    const char *groups[] = {"betweenness", "closeness", "degree", "shortest_path"};
    const char *stats[] = {"min", "max", "median", "mean", "std"};
    int i = 0;
    for (const char *g : groups)
      for (const char *s : stats) n[i++] = std::string(g) + "_" + s;
    n[i++] = "density";
    n[i++] = "edge_count";
    n[i++] = "node_count";
    return n;
  }();
  return names;
}

void write_feature_csv(std::ostream &out, std::span<const std::string> ids,
                       std::span<const FeatureVector> rows) {
  if (ids.size() != rows.size())
    throw std::invalid_argument("feature CSV: id/row count mismatch");
  out << "id";
  for (const auto &name : feature_names()) out << ',' << name;
  out << '\n';
  for (size_t r = 0; r < rows.size(); ++r) {
    out << ids[r];
    for (double v : rows[r]) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace cfgsentry
