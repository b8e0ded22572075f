#ifndef CFGSENTRY_LEARN_H_
#define CFGSENTRY_LEARN_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfgsentry {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Architecture : std::uint8_t { kCnn = 0, kDnn = 1 };

std::string_view architecture_name(Architecture arch);
Architecture parse_architecture(std::string_view name);

enum class LayerKind : std::uint8_t {
  kConv = 1,
  kMaxPool = 2,
  kDropout = 3,
  kFlatten = 4,
  kDense = 5,
  kSoftmax = 6,
};

struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  // Conv: channels in/out, kernel width, zero padding per side.
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int padding = 0;
  // MaxPool: window size, equal to the stride.
  int pool = 0;
  // Dense.
  int in_features = 0;
  int out_features = 0;
  bool relu = false;
  double rate = 0.0;  // Dropout probability.

  friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

// Activation shape: channels x width. Dense outputs have one channel.
struct Shape {
  int channels = 0;
  int width = 0;
  friend bool operator==(const Shape &, const Shape &) = default;
};

// Per-feature min-max scaling to [0, 1]; unseen values are clamped and
// constant features map to 0.
struct Scaler {
  std::vector<double> min;
  std::vector<double> max;

  std::vector<double> apply(std::span<const double> x) const;
};

Scaler fit_scaler(std::span<const std::vector<double>> train);

// Layer chain of the architecture for a given input width:
//  cnn: conv(46, pad) conv(46) pool dropout(.25) conv(92, pad) conv(92) pool
//       dropout(.25) flatten dense(512) dropout(.5) dense(classes) softmax
//  dnn: dense(100) dense(100) dropout(.25) dense(100) dense(100) dropout(.5)
//       dense(classes) softmax
// Throws ShapeError if the width is too small for the chain.
std::vector<LayerSpec> architecture_layers(Architecture arch, int input_width,
                                           int num_classes);

class Model {
 public:
  // Builds the architecture's chain with zero-initialized parameters.
  Model(Architecture arch, int input_width, int num_classes);
  // Explicit chain; throws ShapeError unless it equals the architecture's
  // chain for this width and class count.
  Model(Architecture arch, int input_width, int num_classes,
        std::vector<LayerSpec> layers);

  Architecture architecture() const { return arch_; }
  int input_width() const { return input_width_; }
  int num_classes() const { return num_classes_; }
  const std::vector<LayerSpec> &layers() const { return layers_; }

  // Output shape of every layer, in order (input shape excluded).
  std::vector<Shape> activation_shapes() const;

  // Trainable tensors in layout order: for each conv/dense layer, weights
  // then biases. Conv weights are [out][in][k]; dense weights [out][in].
  std::vector<std::vector<double>> &params() { return params_; }
  const std::vector<std::vector<double>> &params() const { return params_; }
  std::size_t num_parameters() const;

  // Glorot-uniform weights and zero biases.
  void initialize(std::uint64_t seed);

  Scaler scaler;

 private:
  void allocate();

  Architecture arch_;
  int input_width_;
  int num_classes_;
  std::vector<LayerSpec> layers_;
  std::vector<std::vector<double>> params_;
};

// Class probabilities for already-scaled inputs; dropout is disabled.
// Throws ShapeError on width mismatch.
std::vector<std::vector<double>> forward(const Model &m,
                                         std::span<const std::vector<double>> batch);

// Scales a raw input with the model's scaler, then runs forward.
std::vector<double> predict_proba(const Model &m, std::span<const double> raw);
int predict(const Model &m, std::span<const double> raw);

// Mean categorical cross-entropy of a scaled batch without dropout; fills
// `grads` (same layout as params) when given.
double loss_and_gradients(const Model &m, std::span<const std::vector<double>> batch,
                          std::span<const int> labels,
                          std::vector<std::vector<double>> *grads);

// ReLU on/off state and winning max-pool inputs for a scaled batch without
// dropout. The loss is smooth in the parameters wherever this is constant.
std::vector<std::uint8_t> activation_signature(const Model &m,
                                               std::span<const std::vector<double>> batch);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct Dataset {
  std::vector<std::vector<double>> x;  // raw inputs
  std::vector<int> y;
};

// Fits the scaler on `data`, initializes parameters from the seed and runs
// Adam on shuffled mini-batches with dropout. Returns the mean training loss
// per epoch. Throws TrainingError if a class has no samples or the loss
// becomes non-finite.
std::vector<double> train(Model &m, const Dataset &data, const TrainConfig &config);

struct EvalMetrics {
  double accuracy = 0;
  // confusion[predicted][actual]
  std::vector<std::vector<int>> confusion;
  // Only when class 0 is benign and the other classes are malicious.
  // Mislabeled malware / |malware| and mislabeled benign / |benign|, the
  // definitions printed as "FPR" and "FNR" in the original evaluation.
  std::optional<double> reported_fpr;
  std::optional<double> reported_fnr;
  // Conventional rates: benign flagged malicious / |benign| and malware
  // passed as benign / |malware|.
  std::optional<double> fpr;
  std::optional<double> fnr;
};

EvalMetrics evaluate(const Model &m, const Dataset &data, bool class0_is_benign);

std::string metrics_json(const EvalMetrics &metrics);

// Binary checkpoint: "CFGSENT1", format version, architecture, input width,
// class count, layer chain, scaler, then parameters as little-endian
// float64 in layout order.
std::string serialize_model(const Model &m);
Model deserialize_model(std::string_view bytes);
void save_model(const Model &m, const std::filesystem::path &path);
Model load_model(const std::filesystem::path &path);

}  // namespace cfgsentry

#endif  // CFGSENTRY_LEARN_H_
