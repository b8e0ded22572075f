#include "cfgsentry/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cfgsentry/isomorphism.h"
#include "cfgsentry/util.h"

namespace cfgsentry {
namespace {

constexpr std::uint64_t kMotifStream = 1'000'000;
constexpr std::uint64_t kSplitStream = 2'000'000;

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

Label degree_label(int out_degree) { return static_cast<Label>(std::min(out_degree, 3)); }

int draw_size(Rng &rng, int lo, int hi) {
  if (lo == hi) return lo;
  double x = std::exp(rng.uniform(std::log(lo), std::log(hi + 1.0)));
  return std::clamp(static_cast<int>(x), lo, hi);
}

Motif draw_motif(Rng &rng, const CorpusConfig &config) {
  const int k = rng.range(config.motif_min_nodes, config.motif_max_nodes);
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < k; ++i) edges.emplace(i, i + 1);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (a != b && b != a + 1 && rng.bernoulli(config.motif_density)) edges.emplace(a, b);
  Motif m;
  m.entry = 0;
  m.exits = {k - 1};
  std::vector<int> out_degree(k, 0);
  for (auto [a, b] : edges) ++out_degree[a];
  ++out_degree[k - 1];  // the edge leaving the motif
  Digraph g;
  for (int v = 0; v < k; ++v)
    g.add_node(config.label_mode == LabelMode::kDegree ? degree_label(out_degree[v]) : 0);
  for (auto [a, b] : edges) g.add_edge(a, b);
  m.graph = std::move(g);
  return m;
}

// Filler blocks 0..n-1 with node 0 the entry and n-1 the only exit.
std::set<std::pair<int, int>> draw_filler(Rng &rng, const ClassProfile &p, int n) {
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) {
    edges.emplace(i, i + 1);
    const int far = std::min(n - 1, i + p.span);
    const int choices = far - (i + 2) + 1;
    if (choices > 0) {
      if (rng.bernoulli(p.switch_prob)) {
        int targets = std::min(choices, rng.range(2, 3));
        for (int t = 0; t < targets; ++t) edges.emplace(i, i + 2 + static_cast<int>(rng.below(choices)));
      } else if (rng.bernoulli(p.branch_prob)) {
        edges.emplace(i, i + 2 + static_cast<int>(rng.below(choices)));
      }
    }
    if (rng.bernoulli(p.back_prob)) {
      const int lo = std::max(0, i - p.span);
      edges.emplace(i, lo + static_cast<int>(rng.below(i - lo + 1)));
    }
  }
  return edges;
}

Cfg build_sample(Rng &rng, const CorpusConfig &config, SampleClass cls,
                 const std::vector<Motif> &motifs) {
  const ClassProfile &profile = config.classes[static_cast<int>(cls)];
  const int total = draw_size(rng, profile.min_nodes, profile.max_nodes);

  std::vector<const Motif *> planted;
  for (const Motif &m : motifs)
    if (rng.bernoulli(config.motif_prob)) planted.push_back(&m);
  if (!motifs.empty() && planted.empty()) planted.push_back(&motifs.front());
  int motif_nodes = 0;
  for (const Motif *m : planted) motif_nodes += m->graph.size();

  const int filler = std::max(static_cast<int>(planted.size()) + 1, total - motif_nodes);
  auto edges = draw_filler(rng, profile, filler);

  // Splice each motif into a distinct fall-through edge u -> u+1.
  std::vector<int> slots(filler - 1);
  for (int i = 0; i + 1 < filler; ++i) slots[i] = i;
  rng.shuffle(slots);
  int next = filler;
  for (size_t k = 0; k < planted.size(); ++k) {
    const Motif &m = *planted[k];
    const int u = slots[k];
    const int v = u + 1;
    edges.erase({u, v});
    for (auto [a, b] : m.graph.edges()) edges.emplace(next + a, next + b);
    edges.emplace(u, next + m.entry);
    for (int x : m.exits) edges.emplace(next + x, v);
    next += m.graph.size();
  }

  const int n = next;
  std::vector<int> out_degree(n, 0);
  for (auto [a, b] : edges) ++out_degree[a];
  std::vector<Node> nodes(n);
  for (int v = 0; v < n; ++v)
    nodes[v] = {v, config.label_mode == LabelMode::kDegree ? degree_label(out_degree[v]) : 0};
  std::vector<Edge> edge_list(edges.begin(), edges.end());
  return Cfg(std::move(nodes), std::move(edge_list), 0, {filler - 1});
}

}  // namespace

void CorpusConfig::validate() const {
  if (motifs_per_family < 0) throw ConfigError("motifs_per_family must be >= 0");
  if (motif_min_nodes < 2 || motif_min_nodes > motif_max_nodes)
    throw ConfigError("motif node range must satisfy 2 <= min <= max");
  if (!probability(motif_density)) throw ConfigError("motif_density must be in [0, 1]");
  if (!(motif_prob > 0.0 && motif_prob <= 1.0))
    throw ConfigError("motif_prob must be in (0, 1]");
  for (int c = 0; c < kNumSampleClasses; ++c) {
    const ClassProfile &p = classes[c];
    const std::string name(class_name(static_cast<SampleClass>(c)));
    if (p.count < 1) throw ConfigError(name + ": count must be >= 1");
    if (p.min_nodes < 2 || p.min_nodes > p.max_nodes)
      throw ConfigError(name + ": node range must satisfy 2 <= min <= max");
    if (!probability(p.branch_prob) || !probability(p.switch_prob) || !probability(p.back_prob))
      throw ConfigError(name + ": probabilities must be in [0, 1]");
    if (p.span < 1) throw ConfigError(name + ": span must be >= 1");
    if (c != 0 && p.min_nodes < motifs_per_family * (motif_max_nodes + 1) + 1)
      throw ConfigError(name + ": min_nodes cannot hold the planted motifs plus filler");
  }
}

CorpusConfig default_corpus_config() {
  CorpusConfig c;
  c.classes[0] = {120, 10, 250, 0.25, 0.01, 0.06, 6};
  c.classes[1] = {120, 17, 35, 0.45, 0.03, 0.20, 4};
  c.classes[2] = {96, 20, 40, 0.35, 0.10, 0.12, 8};
  c.classes[3] = {12, 17, 30, 0.55, 0.02, 0.30, 3};
  return c;
}

std::vector<Motif> family_motifs(const CorpusConfig &config, SampleClass family) {
  if (!is_malware(family)) return {};
  // Motifs of all families come from one stream so they can be kept distinct.
  Rng rng(derive_seed(config.seed, kMotifStream));
  std::vector<std::vector<Motif>> all(kNumSampleClasses);
  std::vector<const Motif *> drawn;
  for (int c = 1; c < kNumSampleClasses; ++c) {
    all[c].reserve(config.motifs_per_family);
    for (int k = 0; k < config.motifs_per_family; ++k) {
      Motif m;
      for (int attempt = 0;; ++attempt) {
        m = draw_motif(rng, config);
        bool distinct = true;
        for (const Motif *other : drawn)
          if (is_subgraph(m.graph, other->graph) || is_subgraph(other->graph, m.graph))
            distinct = false;
        if (distinct || attempt >= 100) break;
      }
      all[c].push_back(std::move(m));
      drawn.push_back(&all[c].back());
    }
    if (c == static_cast<int>(family)) break;
  }
  return all[static_cast<int>(family)];
}

std::vector<LabeledSample> generate_corpus(const CorpusConfig &config) {
  config.validate();
  std::vector<LabeledSample> samples;
  std::uint64_t index = 0;
  for (int c = 0; c < kNumSampleClasses; ++c) {
    const auto cls = static_cast<SampleClass>(c);
    const auto motifs = family_motifs(config, cls);
    for (int i = 0; i < config.classes[c].count; ++i, ++index) {
      Rng rng(derive_seed(config.seed, index));
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04d", std::string(class_name(cls)).c_str(), i);
      samples.push_back({id, build_sample(rng, config, cls, motifs), cls});
    }
  }
  return samples;
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split_corpus(
    const std::vector<LabeledSample> &corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must be in (0, 1)");
  std::vector<char> to_train(corpus.size(), 0);
  for (int c = 0; c < kNumSampleClasses; ++c) {
    std::vector<size_t> members;
    for (size_t i = 0; i < corpus.size(); ++i)
      if (static_cast<int>(corpus[i].cls) == c) members.push_back(i);
    if (members.empty()) continue;
    if (members.size() < 2)
      throw std::invalid_argument(std::string("class '") +
                                  std::string(class_name(static_cast<SampleClass>(c))) +
                                  "' needs at least two samples to split");
    Rng rng(derive_seed(seed, kSplitStream + c));
    rng.shuffle(members);
    auto n_train = static_cast<size_t>(std::llround(train_fraction * members.size()));
    n_train = std::clamp<size_t>(n_train, 1, members.size() - 1);
    for (size_t k = 0; k < n_train; ++k) to_train[members[k]] = 1;
  }
  std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> result;
  for (size_t i = 0; i < corpus.size(); ++i)
    (to_train[i] ? result.first : result.second).push_back(corpus[i]);
  return result;
}

}  // namespace cfgsentry
