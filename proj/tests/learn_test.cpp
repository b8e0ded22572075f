#include "cfgsentry/learn.h"

#include <gtest/gtest.h>

#include <numeric>

#include "oracles.h"

namespace cfgsentry {
namespace {

std::vector<std::vector<double>> random_batch(Rng &rng, int n, int width) {
  std::vector<std::vector<double>> batch(n, std::vector<double>(width));
  for (auto &row : batch)
    for (double &x : row) x = rng.uniform();
  return batch;
}

// Two Gaussian-free blobs separated along every coordinate.
Dataset separable(Rng &rng, int n, int width) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    int y = i % 2;
    std::vector<double> x(width);
    for (double &v : x) v = (y ? 0.6 : 0.0) + rng.uniform(0, 0.4);
    d.x.push_back(x);
    d.y.push_back(y);
  }
  return d;
}

TEST(Scaler, MinMax) {
  std::vector<std::vector<double>> train{{2, 7, 0}, {4, 7, 5}, {6, 7, 5}};
  Scaler s = fit_scaler(train);
  std::vector<double> x{4, 7, 10};
  auto y = s.apply(x);
  EXPECT_EQ(y[0], 0.5);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 1.0);
  std::vector<double> low{-3, 7, -1};
  EXPECT_EQ(s.apply(low)[0], 0.0);
  EXPECT_THROW(fit_scaler({}), std::invalid_argument);
}

TEST(Architecture, CnnShapeChain) {
  Model m(Architecture::kCnn, 23, 2);
  std::vector<Shape> expected{{46, 23}, {46, 21}, {46, 10}, {46, 10}, {92, 10}, {92, 8},
                              {92, 4},  {92, 4},  {1, 368}, {1, 512}, {1, 512}, {1, 2},
                              {1, 2}};
  EXPECT_EQ(m.activation_shapes(), expected);
}

TEST(Architecture, DnnShapeChain) {
  Model m(Architecture::kDnn, 23, 4);
  std::vector<Shape> expected{{1, 100}, {1, 100}, {1, 100}, {1, 100},
                              {1, 100}, {1, 100}, {1, 4},   {1, 4}};
  EXPECT_EQ(m.activation_shapes(), expected);
}

TEST(Architecture, WiderInputRecomputesFlatten) {
  Model m(Architecture::kCnn, 300, 2);
  // 300 -> 298 -> 149 -> 147 -> 73.
  EXPECT_EQ(m.activation_shapes()[8], (Shape{1, 92 * 73}));
  EXPECT_THROW(Model(Architecture::kCnn, 8, 2), ShapeError);
  EXPECT_THROW(Model(Architecture::kDnn, 23, 1), ShapeError);
}

TEST(Architecture, OtherChainsRejected) {
  auto layers = architecture_layers(Architecture::kCnn, 23, 2);
  EXPECT_NO_THROW(Model(Architecture::kCnn, 23, 2, layers));
  for (size_t i = 0; i < layers.size(); ++i) {
    auto broken = layers;
    switch (broken[i].kind) {
      case LayerKind::kConv: broken[i].out_channels += 1; break;
      case LayerKind::kMaxPool: broken[i].pool = 3; break;
      case LayerKind::kDropout: broken[i].rate = 0.3; break;
      case LayerKind::kDense: broken[i].out_features += 1; break;
      default: broken[i].kind = LayerKind::kDropout; break;
    }
    EXPECT_THROW(Model(Architecture::kCnn, 23, 2, broken), ShapeError) << i;
  }
  auto dropped = layers;
  dropped.erase(dropped.begin() + 1);
  EXPECT_THROW(Model(Architecture::kCnn, 23, 2, dropped), ShapeError);
  EXPECT_THROW(Model(Architecture::kDnn, 23, 2, layers), ShapeError);
}

TEST(Forward, ProbabilitiesSumToOne) {
  Rng rng(1);
  for (auto arch : {Architecture::kCnn, Architecture::kDnn}) {
    Model m(arch, 23, 4);
    m.initialize(3);
    auto batch = random_batch(rng, 20, 23);
    for (auto &row : batch) row[0] = 1e6 * (rng.uniform() - 0.5);  // unscaled extremes
    for (const auto &p : forward(m, batch)) {
      double sum = 0;
      for (double x : p) {
        EXPECT_GE(x, 0.0);
        sum += x;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(Forward, ZeroWeightsGiveUniform) {
  Model m(Architecture::kCnn, 23, 4);
  Rng rng(2);
  for (const auto &p : forward(m, random_batch(rng, 3, 23)))
    for (double x : p) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Forward, WidthMismatch) {
  Model m(Architecture::kDnn, 23, 2);
  std::vector<std::vector<double>> batch{std::vector<double>(22, 0.0)};
  EXPECT_THROW(forward(m, batch), ShapeError);
  EXPECT_THROW(predict(m, batch[0]), ShapeError);
}

TEST(Gradients, DnnMatchesFiniteDifferences) {
  Rng rng(4);
  Model m(Architecture::kDnn, 23, 4);
  m.initialize(5);
  for (auto &t : m.params())
    for (double &b : t) b += rng.uniform(-0.05, 0.05);  // non-zero biases too
  auto batch = random_batch(rng, 4, 23);
  std::vector<int> labels{0, 1, 2, 3};
  auto check = oracle::gradient_check(m, batch, labels, 1e-4, 100000);
  EXPECT_LE(check.worst, 1e-3);
  EXPECT_EQ(check.relative_error.size(), 10u);
  EXPECT_TRUE(check.well_covered());
}

TEST(Gradients, CnnMatchesFiniteDifferences) {
  Rng rng(6);
  Model m(Architecture::kCnn, 23, 3);
  m.initialize(7);
  for (auto &t : m.params())
    for (double &b : t) b += rng.uniform(-0.05, 0.05);
  auto batch = random_batch(rng, 4, 23);
  std::vector<int> labels{0, 1, 2, 1};
  auto check = oracle::gradient_check(m, batch, labels, 1e-4, 150);
  EXPECT_LE(check.worst, 1e-3);
  EXPECT_EQ(check.relative_error.size(), 12u);
  EXPECT_TRUE(check.well_covered());
}

TEST(Train, SeparableToySet) {
  Rng rng(8);
  Dataset d = separable(rng, 64, 23);
  for (auto arch : {Architecture::kDnn, Architecture::kCnn}) {
    Model m(arch, 23, 2);
    TrainConfig config;
    config.seed = 9;
    auto history = train(m, d, config);
    ASSERT_EQ(history.size(), 100u);
    EXPECT_LE(history.back(), history.front());
    EXPECT_GE(evaluate(m, d, true).accuracy, 0.95) << architecture_name(arch);
  }
}

TEST(Train, Deterministic) {
  Rng rng(10);
  Dataset d = separable(rng, 40, 23);
  TrainConfig config;
  config.epochs = 3;
  config.seed = 11;
  Model a(Architecture::kCnn, 23, 2), b(Architecture::kCnn, 23, 2);
  train(a, d, config);
  train(b, d, config);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
  config.seed = 12;
  Model c(Architecture::kCnn, 23, 2);
  train(c, d, config);
  EXPECT_NE(serialize_model(a), serialize_model(c));
}

TEST(Train, Errors) {
  Rng rng(12);
  Dataset d = separable(rng, 10, 23);
  Model m(Architecture::kDnn, 23, 3);
  EXPECT_THROW(train(m, d, {}), TrainingError);  // class 2 absent
  Dataset nan = separable(rng, 10, 23);
  Model two(Architecture::kDnn, 23, 2);
  TrainConfig big;
  big.learning_rate = 1e300;
  big.epochs = 5;
  EXPECT_THROW(train(two, nan, big), TrainingError);
}

TEST(Evaluate, AccuracyAndRates) {
  // Zero weights and a bias favouring class 0: predicts benign everywhere.
  Model m(Architecture::kDnn, 23, 2);
  m.params().back()[0] = 1.0;
  Dataset d;
  for (int i = 0; i < 10; ++i) {
    d.x.push_back(std::vector<double>(23, i));
    d.y.push_back(i == 0 ? 1 : 0);
  }
  auto r = evaluate(m, d, true);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.9);
  EXPECT_EQ(r.confusion[0][0], 9);
  EXPECT_EQ(r.confusion[0][1], 1);
  EXPECT_EQ(*r.reported_fpr, 1.0);  // the malware sample is mislabeled
  EXPECT_EQ(*r.reported_fnr, 0.0);
  EXPECT_EQ(*r.fpr, 0.0);
  EXPECT_EQ(*r.fnr, 1.0);
  EXPECT_FALSE(evaluate(m, d, false).reported_fpr.has_value());
  EXPECT_THROW(evaluate(m, Dataset{}, true), std::invalid_argument);
}

TEST(Evaluate, PerfectClassifier) {
  Rng rng(13);
  Dataset d;
  for (int i = 0; i < 80; ++i) {
    int y = i % 4;
    std::vector<double> x(23, 0.0);
    for (int k = 0; k < 5; ++k) x[y * 5 + k] = 1.0 + rng.uniform(0, 0.1);
    d.x.push_back(x);
    d.y.push_back(y);
  }
  Model m(Architecture::kDnn, 23, 4);
  TrainConfig config;
  config.epochs = 60;
  train(m, d, config);
  auto r = evaluate(m, d, true);
  ASSERT_EQ(r.accuracy, 1.0);
  for (int p = 0; p < 4; ++p)
    for (int a = 0; a < 4; ++a) EXPECT_EQ(r.confusion[p][a] != 0, p == a);
  EXPECT_EQ(*r.reported_fpr, 0.0);
  EXPECT_EQ(*r.reported_fnr, 0.0);
}

TEST(Evaluate, RandomLabelsNearChance) {
  Rng rng(14);
  Model m(Architecture::kDnn, 23, 4);
  m.initialize(15);
  Dataset d;
  d.x = random_batch(rng, 400, 23);
  for (int i = 0; i < 400; ++i) d.y.push_back(i % 4);
  rng.shuffle(d.y);
  auto r = evaluate(m, d, true);
  EXPECT_GE(r.accuracy, 0.15);
  EXPECT_LE(r.accuracy, 0.35);
  int total = 0, trace = 0;
  for (int p = 0; p < 4; ++p)
    for (int a = 0; a < 4; ++a) total += r.confusion[p][a], trace += p == a ? r.confusion[p][a] : 0;
  EXPECT_EQ(total, 400);
  EXPECT_DOUBLE_EQ(r.accuracy, trace / 400.0);
  for (int a = 0; a < 4; ++a) {
    int column = 0;
    for (int p = 0; p < 4; ++p) column += r.confusion[p][a];
    EXPECT_EQ(column, 100);
  }
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(16);
  for (auto arch : {Architecture::kCnn, Architecture::kDnn}) {
    Model m(arch, 40, 3);
    m.initialize(17);
    m.scaler = fit_scaler(random_batch(rng, 5, 40));
    std::string bytes = serialize_model(m);
    EXPECT_EQ(bytes.substr(0, 8), "CFGSENT1");
    Model back = deserialize_model(bytes);
    EXPECT_EQ(back.params(), m.params());
    EXPECT_EQ(back.layers(), m.layers());
    EXPECT_EQ(back.scaler.min, m.scaler.min);
    EXPECT_EQ(serialize_model(back), bytes);
  }
}

TEST(Checkpoint, CorruptionRejected) {
  Model m(Architecture::kDnn, 23, 2);
  m.initialize(1);
  std::string bytes = serialize_model(m);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_model(bad_magic), ShapeError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 1)), ShapeError);
  EXPECT_THROW(deserialize_model(bytes + "x"), ShapeError);
  // First layer's out_features lives after magic(8) version(4) arch(1)
  // width(4) classes(4) count(4) kind(1) and six int32 fields before it.
  std::string bad_chain = bytes;
  bad_chain[8 + 4 + 1 + 4 + 4 + 4 + 1 + 4 * 6] = 99;
  EXPECT_THROW(deserialize_model(bad_chain), ShapeError);
}

}  // namespace
}  // namespace cfgsentry
