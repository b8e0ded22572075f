#include "cfgsentry/corpus.h"

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "cfgsentry/graph_io.h"
#include "cfgsentry/isomorphism.h"

namespace cfgsentry {
namespace {

std::string dump(const std::vector<LabeledSample> &samples) {
  std::string out;
  for (const auto &s : samples)
    out += s.id + " " + std::string(class_name(s.cls)) + " " + serialize_graph(s.cfg);
  return out;
}

CorpusConfig small_config(std::uint64_t seed) {
  CorpusConfig c = default_corpus_config();
  c.seed = seed;
  for (auto &p : c.classes) {
    p.count = std::min(p.count, 20);
    p.max_nodes = std::min(p.max_nodes, 60);
  }
  return c;
}

TEST(Corpus, CertainMotifsAlwaysPlanted) {
  CorpusConfig c = small_config(11);
  c.motif_prob = 1.0;
  const auto corpus = generate_corpus(c);
  for (int f = 1; f < kNumSampleClasses; ++f) {
    const auto family = static_cast<SampleClass>(f);
    const auto motifs = family_motifs(c, family);
    ASSERT_EQ(static_cast<int>(motifs.size()), c.motifs_per_family);
    for (const auto &s : corpus) {
      if (s.cls != family) continue;
      for (const auto &m : motifs) EXPECT_TRUE(is_subgraph(m.graph, s.cfg.graph())) << s.id;
    }
  }
}

TEST(Corpus, EveryFamilySampleHasAMotif) {
  const CorpusConfig c = small_config(4);
  for (const auto &s : generate_corpus(c)) {
    if (!is_malware(s.cls)) continue;
    bool any = false;
    for (const auto &m : family_motifs(c, s.cls)) any = any || is_subgraph(m.graph, s.cfg.graph());
    EXPECT_TRUE(any) << s.id;
  }
}

TEST(Corpus, SameSeedSameBytes) {
  const CorpusConfig c = small_config(5);
  EXPECT_EQ(dump(generate_corpus(c)), dump(generate_corpus(c)));
  EXPECT_NE(dump(generate_corpus(c)), dump(generate_corpus(small_config(6))));
}

TEST(Corpus, CountsIdsAndSizes) {
  const CorpusConfig c = small_config(2);
  const auto corpus = generate_corpus(c);
  std::map<SampleClass, int> counts;
  std::set<std::string> ids;
  for (const auto &s : corpus) {
    ++counts[s.cls];
    ids.insert(s.id);
    const auto &p = c.classes[static_cast<int>(s.cls)];
    EXPECT_GE(s.cfg.num_nodes(), p.min_nodes) << s.id;
    EXPECT_LE(s.cfg.num_nodes(), p.max_nodes) << s.id;
    EXPECT_TRUE(s.cfg.graph().weakly_connected()) << s.id;
    EXPECT_EQ(s.id.rfind(std::string(class_name(s.cls)) + "_", 0), 0u);
  }
  EXPECT_EQ(ids.size(), corpus.size());
  for (int k = 0; k < kNumSampleClasses; ++k)
    EXPECT_EQ(counts[static_cast<SampleClass>(k)], c.classes[k].count);
}

TEST(Corpus, BenignRarelyContainsMotifs) {
  const CorpusConfig c = default_corpus_config();
  const auto corpus = generate_corpus(c);
  std::vector<Motif> motifs;
  for (int f = 1; f < kNumSampleClasses; ++f)
    for (auto &m : family_motifs(c, static_cast<SampleClass>(f))) motifs.push_back(std::move(m));
  int benign = 0, hit = 0;
  for (const auto &s : corpus) {
    if (is_malware(s.cls)) continue;
    ++benign;
    for (const auto &m : motifs)
      if (is_subgraph(m.graph, s.cfg.graph())) {
        ++hit;
        break;
      }
  }
  ASSERT_GT(benign, 0);
  EXPECT_LE(static_cast<double>(hit) / benign, 0.05) << hit << " of " << benign;
}

TEST(Corpus, InvalidConfigsRejected) {
  auto bad = [](auto mutate) {
    CorpusConfig c = default_corpus_config();
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](CorpusConfig &c) { c.classes[1].count = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](CorpusConfig &c) { c.motif_prob = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](CorpusConfig &c) { c.motif_prob = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](CorpusConfig &c) { c.classes[2].max_nodes = 4; }).validate(), ConfigError);
  EXPECT_THROW(bad([](CorpusConfig &c) { c.classes[0].branch_prob = -0.1; }).validate(),
               ConfigError);
  EXPECT_NO_THROW(default_corpus_config().validate());
}

std::vector<LabeledSample> hundred_per_class() {
  CorpusConfig c = default_corpus_config();
  for (auto &p : c.classes) {
    p.count = 100;
    p.max_nodes = std::min(p.max_nodes, 40);
  }
  return generate_corpus(c);
}

TEST(Split, EightyTwentyPerClass) {
  const auto corpus = hundred_per_class();
  const auto [train, test] = split_corpus(corpus, 0.8, 9);
  std::map<SampleClass, int> tr, te;
  for (const auto &s : train) ++tr[s.cls];
  for (const auto &s : test) ++te[s.cls];
  for (int k = 0; k < kNumSampleClasses; ++k) {
    EXPECT_EQ(tr[static_cast<SampleClass>(k)], 80);
    EXPECT_EQ(te[static_cast<SampleClass>(k)], 20);
  }
}

TEST(Split, PartitionAndDeterminism) {
  const auto corpus = generate_corpus(small_config(3));
  const auto [train, test] = split_corpus(corpus, 0.7, 21);
  std::multiset<std::string> all;
  for (const auto &s : train) all.insert(s.id);
  for (const auto &s : test) all.insert(s.id);
  std::multiset<std::string> expected;
  for (const auto &s : corpus) expected.insert(s.id);
  EXPECT_EQ(all, expected);

  const auto [train2, test2] = split_corpus(corpus, 0.7, 21);
  EXPECT_EQ(dump(train), dump(train2));
  EXPECT_EQ(dump(test), dump(test2));
  const auto [train3, test3] = split_corpus(corpus, 0.7, 22);
  EXPECT_NE(dump(train), dump(train3));
}

TEST(Split, StratifiedWithinOneSample) {
  const auto corpus = generate_corpus(small_config(8));
  for (double fraction : {0.3, 0.5, 0.8, 0.95}) {
    const auto [train, test] = split_corpus(corpus, fraction, 1);
    std::map<SampleClass, int> total, tr;
    for (const auto &s : corpus) ++total[s.cls];
    for (const auto &s : train) ++tr[s.cls];
    for (auto [cls, n] : total) {
      EXPECT_LE(std::abs(tr[cls] - fraction * n), 1.0) << fraction;
      EXPECT_GE(tr[cls], 1);
      EXPECT_LT(tr[cls], n);
    }
  }
}

TEST(Split, Errors) {
  const auto corpus = generate_corpus(small_config(3));
  EXPECT_THROW(split_corpus(corpus, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(split_corpus(corpus, 1.0, 1), std::invalid_argument);
  std::vector<LabeledSample> lonely(corpus.begin(), corpus.end());
  lonely.erase(std::remove_if(lonely.begin(), lonely.end(),
                              [](const LabeledSample &s) { return s.id != "family_c_0000" &&
                                                                  s.cls == SampleClass::kFamilyC; }),
               lonely.end());
  EXPECT_THROW(split_corpus(lonely, 0.8, 1), std::invalid_argument);
}

}  // namespace
}  // namespace cfgsentry
