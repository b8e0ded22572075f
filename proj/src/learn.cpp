#include "cfgsentry/learn.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include <Eigen/Dense>

#include "cfgsentry/graph_io.h"
#include "cfgsentry/util.h"
#include "json.hpp"

namespace cfgsentry {
namespace {

constexpr char kMagic[] = "CFGSENT1";
constexpr std::uint32_t kFormatVersion = 1;

LayerSpec conv(int in, int out, int padding) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = 3;
  l.padding = padding;
  l.relu = true;
  return l;
}

LayerSpec maxpool() {
  LayerSpec l;
  l.kind = LayerKind::kMaxPool;
  l.pool = 2;
  return l;
}

LayerSpec dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::kDropout;
  l.rate = rate;
  return l;
}

LayerSpec dense(int in, int out, bool relu) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.in_features = in;
  l.out_features = out;
  l.relu = relu;
  return l;
}

LayerSpec simple(LayerKind kind) {
  LayerSpec l;
  l.kind = kind;
  return l;
}

bool has_params(const LayerSpec &l) {
  return l.kind == LayerKind::kConv || l.kind == LayerKind::kDense;
}

Shape output_shape(const LayerSpec &l, Shape in) {
  switch (l.kind) {
    case LayerKind::kConv:
      return {l.out_channels, in.width + 2 * l.padding - l.kernel + 1};
    case LayerKind::kMaxPool:
      return {in.channels, in.width / l.pool};
    case LayerKind::kFlatten:
      return {1, in.channels * in.width};
    case LayerKind::kDense:
      return {1, l.out_features};
    case LayerKind::kDropout:
    case LayerKind::kSoftmax:
      return in;
  }
  return in;
}

using Mat = Eigen::MatrixXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

// Batch activations kept for back-propagation; one column per sample, rows
// in channel-major order (c * width + x).
struct Trace {
  std::vector<Mat> acts;  // acts[0] = input, acts[l+1] = layer l
  std::vector<Mat> masks;
  std::vector<std::vector<int>> argmax;  // row index of the winner per output entry
};

class Network {
 public:
  explicit Network(const Model &m) : m_(m) {
    Shape s{1, m.input_width()};
    int p = 0;
    for (const LayerSpec &l : m.layers()) {
      in_shapes_.push_back(s);
      s = output_shape(l, s);
      param_index_.push_back(has_params(l) ? p : -1);
      if (has_params(l)) p += 2;
    }
  }

  // Input is width x batch. `rng` enables dropout.
  void run_forward(Mat input, Trace &t, Rng *rng) const {
    const auto &layers = m_.layers();
    t.acts.resize(layers.size() + 1);
    t.masks.resize(layers.size());
    t.argmax.resize(layers.size());
    t.acts[0] = std::move(input);
    const Eigen::Index batch = t.acts[0].cols();
    for (size_t li = 0; li < layers.size(); ++li) {
      const LayerSpec &l = layers[li];
      const Mat &in = t.acts[li];
      Mat &out = t.acts[li + 1];
      const Shape is = in_shapes_[li];
      switch (l.kind) {
        case LayerKind::kConv:
          conv_forward(l, is, param(li, 0), param(li, 1), in, out);
          break;
        case LayerKind::kMaxPool: {
          const int ow = is.width / l.pool;
          out.resize(static_cast<Eigen::Index>(is.channels) * ow, batch);
          auto &arg = t.argmax[li];
          arg.resize(out.size());
          for (Eigen::Index j = 0; j < batch; ++j) {
            const double *col = in.col(j).data();
            for (int c = 0; c < is.channels; ++c) {
              for (int x = 0; x < ow; ++x) {
                const int base = c * is.width + x * l.pool;
                int best = base;
                for (int k = 1; k < l.pool; ++k)
                  if (col[base + k] > col[best]) best = base + k;
                out(c * ow + x, j) = col[best];
                arg[j * out.rows() + c * ow + x] = best;
              }
            }
          }
          break;
        }
        case LayerKind::kDropout:
          out = in;
          if (rng) {
            Mat &mask = t.masks[li];
            mask.resize(in.rows(), in.cols());
            const double keep = 1.0 / (1.0 - l.rate);
            for (Eigen::Index i = 0; i < mask.size(); ++i)
              mask.data()[i] = rng->uniform() < l.rate ? 0.0 : keep;
            out.array() *= mask.array();
          } else {
            t.masks[li].resize(0, 0);
          }
          break;
        case LayerKind::kFlatten:
          out = in;
          break;
        case LayerKind::kDense: {
          Eigen::Map<const RowMat> w(param(li, 0).data(), l.out_features, l.in_features);
          out.noalias() = w * in;
          out.colwise() += ConstVecMap(param(li, 1).data(), l.out_features);
          if (l.relu) out = out.cwiseMax(0.0);
          break;
        }
        case LayerKind::kSoftmax:
          out.resize(in.rows(), in.cols());
          for (Eigen::Index j = 0; j < batch; ++j) {
            const double mx = in.col(j).maxCoeff();
            out.col(j) = (in.col(j).array() - mx).exp().matrix();
            out.col(j) /= out.col(j).sum();
          }
          break;
      }
    }
  }

  // Summed cross-entropy of the traced batch; accumulates gradients.
  double run_backward(const Trace &t, std::span<const int> labels,
                      std::vector<std::vector<double>> &grads) const {
    const auto &layers = m_.layers();
    const Mat &probs = t.acts.back();
    double loss = 0;
    // Softmax + cross-entropy: gradient w.r.t. the logits.
    Mat g = probs;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      loss -= std::log(std::max(probs(labels[j], j), 1e-300));
      g(labels[j], j) -= 1.0;
    }
    Mat gin;
    for (int li = static_cast<int>(layers.size()) - 2; li >= 0; --li) {
      const LayerSpec &l = layers[li];
      const Mat &in = t.acts[li];
      const Mat &out = t.acts[li + 1];
      const bool need_input_grad = li > 0;
      if (l.relu) g = (out.array() > 0.0).select(g, 0.0);
      switch (l.kind) {
        case LayerKind::kConv:
          conv_backward(l, in_shapes_[li], param(li, 0), in, g, grads[param_index_[li]],
                        grads[param_index_[li] + 1], need_input_grad ? &gin : nullptr);
          g.swap(gin);
          break;
        case LayerKind::kDense: {
          Eigen::Map<const RowMat> w(param(li, 0).data(), l.out_features, l.in_features);
          Eigen::Map<RowMat> gw(grads[param_index_[li]].data(), l.out_features, l.in_features);
          // Products land in Eigen-owned storage first: vectorization peels by
          // destination alignment, which would make results address dependent.
          const Mat gw_batch = g * in.transpose();
          const Eigen::VectorXd gb_batch = g.rowwise().sum();
          gw += gw_batch;
          VecMap(grads[param_index_[li] + 1].data(), l.out_features) += gb_batch;
          if (need_input_grad) gin.noalias() = w.transpose() * g;
          g.swap(gin);
          break;
        }
        case LayerKind::kMaxPool: {
          gin.setZero(in.rows(), in.cols());
          const auto &arg = t.argmax[li];
          for (Eigen::Index j = 0; j < g.cols(); ++j)
            for (Eigen::Index i = 0; i < g.rows(); ++i) gin(arg[j * g.rows() + i], j) += g(i, j);
          g.swap(gin);
          break;
        }
        case LayerKind::kDropout:
          if (t.masks[li].size() != 0) g.array() *= t.masks[li].array();
          break;
        case LayerKind::kFlatten:
        case LayerKind::kSoftmax:
          break;
      }
    }
    return loss;
  }

 private:
  const std::vector<double> &param(size_t layer, int which) const {
    return m_.params()[param_index_[layer] + which];
  }

  // Rows (sample, x), columns (c, k): the input window of every output.
  static void im2col(const LayerSpec &l, int iw, int ow, const Mat &in, Mat &col) {
    col.setZero(in.cols() * ow, static_cast<Eigen::Index>(l.in_channels) * l.kernel);
    for (Eigen::Index j = 0; j < in.cols(); ++j)
      for (int c = 0; c < l.in_channels; ++c)
        for (int k = 0; k < l.kernel; ++k) {
          const int off = k - l.padding;
          const int x0 = std::max(0, -off);
          const int x1 = std::min(ow, iw - off);
          if (x1 > x0)
            col.block(j * ow + x0, c * l.kernel + k, x1 - x0, 1) =
                in.col(j).segment(c * iw + x0 + off, x1 - x0);
        }
  }

  void conv_forward(const LayerSpec &l, Shape is, const std::vector<double> &w,
                    const std::vector<double> &b, const Mat &in, Mat &out) const {
    const int iw = is.width;
    const int ow = iw + 2 * l.padding - l.kernel + 1;
    const int f_count = l.out_channels;
    Mat col;
    im2col(l, iw, ow, in, col);
    Mat res = col * ConstMatMap(w.data(), col.cols(), f_count);
    res.rowwise() += ConstVecMap(b.data(), f_count).transpose();
    if (l.relu) res = res.cwiseMax(0.0);
    out.resize(static_cast<Eigen::Index>(f_count) * ow, in.cols());
    for (Eigen::Index j = 0; j < in.cols(); ++j)
      for (int f = 0; f < f_count; ++f)
        out.col(j).segment(f * ow, ow) = res.col(f).segment(j * ow, ow);
  }

  void conv_backward(const LayerSpec &l, Shape is, const std::vector<double> &w, const Mat &in,
                     const Mat &g, std::vector<double> &gw, std::vector<double> &gb,
                     Mat *gin) const {
    const int iw = is.width;
    const int ow = iw + 2 * l.padding - l.kernel + 1;
    const int f_count = l.out_channels;
    const Eigen::Index batch = in.cols();
    Mat go(batch * ow, f_count);
    for (Eigen::Index j = 0; j < batch; ++j)
      for (int f = 0; f < f_count; ++f) go.col(f).segment(j * ow, ow) = g.col(j).segment(f * ow, ow);
    const Eigen::VectorXd gb_batch = go.colwise().sum().transpose();
    VecMap(gb.data(), f_count) += gb_batch;
    Mat col;
    im2col(l, iw, ow, in, col);
    const Mat gw_batch = col.transpose() * go;
    MatMap(gw.data(), col.cols(), f_count) += gw_batch;
    if (!gin) return;
    Mat gcol = go * ConstMatMap(w.data(), col.cols(), f_count).transpose();
    gin->setZero(static_cast<Eigen::Index>(l.in_channels) * iw, batch);
    for (Eigen::Index j = 0; j < batch; ++j)
      for (int c = 0; c < l.in_channels; ++c)
        for (int k = 0; k < l.kernel; ++k) {
          const int off = k - l.padding;
          const int x0 = std::max(0, -off);
          const int x1 = std::min(ow, iw - off);
          if (x1 > x0)
            gin->col(j).segment(c * iw + x0 + off, x1 - x0) +=
                gcol.block(j * ow + x0, c * l.kernel + k, x1 - x0, 1);
        }
  }

  const Model &m_;
  std::vector<Shape> in_shapes_;
  std::vector<int> param_index_;
};

// Rows of `rows` selected by `order`, as a width x n matrix.
template <typename Index>
Mat to_columns(std::span<const std::vector<double>> rows, std::span<const Index> order) {
  Mat x(rows.empty() ? 0 : static_cast<Eigen::Index>(rows[order[0]].size()),
        static_cast<Eigen::Index>(order.size()));
  for (size_t j = 0; j < order.size(); ++j)
    x.col(j) = ConstVecMap(rows[order[j]].data(), x.rows());
  return x;
}

std::vector<size_t> all_rows(size_t n) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<std::vector<double>> zeros_like(const std::vector<std::vector<double>> &p) {
  std::vector<std::vector<double>> z;
  z.reserve(p.size());
  for (const auto &t : p) z.emplace_back(t.size(), 0.0);
  return z;
}

void check_width(const Model &m, std::size_t width) {
  if (static_cast<int>(width) != m.input_width())
    throw ShapeError("input width " + std::to_string(width) + " does not match model width " +
                     std::to_string(m.input_width()));
}

// Little-endian primitives for the checkpoint format.
class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::string_view bytes(size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > in_.size()) throw ShapeError("checkpoint truncated");
  }
  std::string_view in_;
  size_t pos_ = 0;
};

}  // namespace

std::string_view architecture_name(Architecture arch) {
  return arch == Architecture::kCnn ? "cnn" : "dnn";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "cnn") return Architecture::kCnn;
  if (name == "dnn") return Architecture::kDnn;
  throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

std::vector<double> Scaler::apply(std::span<const double> x) const {
  if (x.size() != min.size()) throw ShapeError("scaler width mismatch");
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double range = max[i] - min[i];
    out[i] = range > 0 ? std::clamp((x[i] - min[i]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

Scaler fit_scaler(std::span<const std::vector<double>> train) {
  if (train.empty()) throw std::invalid_argument("cannot fit a scaler on no data");
  Scaler s;
  s.min = train.front();
  s.max = train.front();
  for (const auto &row : train) {
    if (row.size() != s.min.size()) throw ShapeError("ragged training matrix");
    for (size_t i = 0; i < row.size(); ++i) {
      s.min[i] = std::min(s.min[i], row[i]);
      s.max[i] = std::max(s.max[i], row[i]);
    }
  }
  return s;
}

std::vector<LayerSpec> architecture_layers(Architecture arch, int input_width,
                                           int num_classes) {
  if (num_classes < 2) throw ShapeError("need at least two classes");
  if (arch == Architecture::kDnn) {
    if (input_width < 1) throw ShapeError("input width must be positive");
    return {dense(input_width, 100, true), dense(100, 100, true), dropout(0.25),
            dense(100, 100, true),         dense(100, 100, true), dropout(0.5),
            dense(100, num_classes, false), simple(LayerKind::kSoftmax)};
  }
  const int after_block1 = (input_width - 2) / 2;
  const int after_block2 = (after_block1 - 2) / 2;
  if (input_width - 2 < 2 || after_block1 - 2 < 2 || after_block2 < 1)
    throw ShapeError("input width " + std::to_string(input_width) + " too small for the CNN");
  return {conv(1, 46, 1),   conv(46, 46, 0),  maxpool(), dropout(0.25),
          conv(46, 92, 1),  conv(92, 92, 0),  maxpool(), dropout(0.25),
          simple(LayerKind::kFlatten),
          dense(92 * after_block2, 512, true), dropout(0.5),
          dense(512, num_classes, false), simple(LayerKind::kSoftmax)};
}

Model::Model(Architecture arch, int input_width, int num_classes)
    : arch_(arch), input_width_(input_width), num_classes_(num_classes),
      layers_(architecture_layers(arch, input_width, num_classes)) {
  allocate();
}

Model::Model(Architecture arch, int input_width, int num_classes,
             std::vector<LayerSpec> layers)
    : arch_(arch), input_width_(input_width), num_classes_(num_classes),
      layers_(std::move(layers)) {
  if (layers_ != architecture_layers(arch, input_width, num_classes))
    throw ShapeError("layer chain does not match the " +
                     std::string(architecture_name(arch)) + " architecture for width " +
                     std::to_string(input_width));
  allocate();
}

void Model::allocate() {
  params_.clear();
  for (const LayerSpec &l : layers_) {
    if (l.kind == LayerKind::kConv) {
      params_.emplace_back(static_cast<size_t>(l.out_channels) * l.in_channels * l.kernel, 0.0);
      params_.emplace_back(l.out_channels, 0.0);
    } else if (l.kind == LayerKind::kDense) {
      params_.emplace_back(static_cast<size_t>(l.out_features) * l.in_features, 0.0);
      params_.emplace_back(l.out_features, 0.0);
    }
  }
  scaler.min.assign(input_width_, 0.0);
  scaler.max.assign(input_width_, 1.0);
}

std::vector<Shape> Model::activation_shapes() const {
  std::vector<Shape> shapes;
  Shape s{1, input_width_};
  for (const LayerSpec &l : layers_) {
    s = output_shape(l, s);
    shapes.push_back(s);
  }
  return shapes;
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  for (const auto &t : params_) n += t.size();
  return n;
}

void Model::initialize(std::uint64_t seed) {
  Rng rng(seed);
  size_t p = 0;
  for (const LayerSpec &l : layers_) {
    if (!has_params(l)) continue;
    double fan_in, fan_out;
    if (l.kind == LayerKind::kConv) {
      fan_in = l.in_channels * l.kernel;
      fan_out = l.out_channels * l.kernel;
    } else {
      fan_in = l.in_features;
      fan_out = l.out_features;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double &w : params_[p]) w = rng.uniform(-limit, limit);
    std::fill(params_[p + 1].begin(), params_[p + 1].end(), 0.0);
    p += 2;
  }
}

std::vector<std::vector<double>> forward(const Model &m,
                                         std::span<const std::vector<double>> batch) {
  for (const auto &x : batch) check_width(m, x.size());
  std::vector<std::vector<double>> out;
  if (batch.empty()) return out;
  Network net(m);
  Trace trace;
  const auto idx = all_rows(batch.size());
  net.run_forward(to_columns<size_t>(batch, idx), trace, nullptr);
  const Mat &probs = trace.acts.back();
  for (Eigen::Index j = 0; j < probs.cols(); ++j)
    out.emplace_back(probs.col(j).data(), probs.col(j).data() + probs.rows());
  return out;
}

std::vector<double> predict_proba(const Model &m, std::span<const double> raw) {
  check_width(m, raw.size());
  std::vector<std::vector<double>> batch{m.scaler.apply(raw)};
  return forward(m, batch).front();
}

int predict(const Model &m, std::span<const double> raw) {
  auto p = predict_proba(m, raw);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double loss_and_gradients(const Model &m, std::span<const std::vector<double>> batch,
                          std::span<const int> labels,
                          std::vector<std::vector<double>> *grads) {
  if (batch.size() != labels.size() || batch.empty())
    throw std::invalid_argument("batch and labels must be non-empty and equal length");
  for (size_t i = 0; i < batch.size(); ++i) {
    check_width(m, batch[i].size());
    if (labels[i] < 0 || labels[i] >= m.num_classes())
      throw std::invalid_argument("label out of range");
  }
  Network net(m);
  Trace trace;
  const auto idx = all_rows(batch.size());
  net.run_forward(to_columns<size_t>(batch, idx), trace, nullptr);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0;
  if (grads) {
    auto local = zeros_like(m.params());
    loss = net.run_backward(trace, labels, local);
    for (auto &t : local)
      for (double &v : t) v *= scale;
    *grads = std::move(local);
  } else {
    for (size_t j = 0; j < batch.size(); ++j)
      loss -= std::log(std::max(trace.acts.back()(labels[j], j), 1e-300));
  }
  return loss * scale;
}

std::vector<std::uint8_t> activation_signature(const Model &m,
                                               std::span<const std::vector<double>> batch) {
  for (const auto &x : batch) check_width(m, x.size());
  std::vector<std::uint8_t> signature;
  if (batch.empty()) return signature;
  Network net(m);
  Trace trace;
  const auto idx = all_rows(batch.size());
  net.run_forward(to_columns<size_t>(batch, idx), trace, nullptr);
  for (size_t li = 0; li < m.layers().size(); ++li) {
    const LayerSpec &l = m.layers()[li];
    const Mat &out = trace.acts[li + 1];
    if (l.relu)
      for (Eigen::Index i = 0; i < out.size(); ++i) signature.push_back(out.data()[i] > 0);
    if (l.kind == LayerKind::kMaxPool)
      for (int a : trace.argmax[li]) signature.push_back(static_cast<std::uint8_t>(a % l.pool));
  }
  return signature;
}

std::vector<double> train(Model &m, const Dataset &data, const TrainConfig &config) {
  if (data.x.size() != data.y.size() || data.x.empty())
    throw TrainingError("training data must be non-empty with one label per row");
  if (config.epochs < 0 || config.batch_size < 1)
    throw TrainingError("invalid epochs or batch size");
  std::vector<int> per_class(m.num_classes(), 0);
  for (int y : data.y) {
    if (y < 0 || y >= m.num_classes()) throw TrainingError("label out of range");
    ++per_class[y];
  }
  for (int c = 0; c < m.num_classes(); ++c)
    if (per_class[c] == 0)
      throw TrainingError("class " + std::to_string(c) + " absent from training data");

  m.scaler = fit_scaler(data.x);
  std::vector<std::vector<double>> scaled;
  scaled.reserve(data.x.size());
  for (const auto &row : data.x) {
    check_width(m, row.size());
    scaled.push_back(m.scaler.apply(row));
  }
  m.initialize(derive_seed(config.seed, 0));
  Rng shuffle_rng(derive_seed(config.seed, 1));
  Rng dropout_rng(derive_seed(config.seed, 2));

  Network net(m);
  Trace trace;
  auto grads = zeros_like(m.params());
  auto moment1 = zeros_like(m.params());
  auto moment2 = zeros_like(m.params());
  std::vector<int> order(scaled.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      for (auto &t : grads) std::fill(t.begin(), t.end(), 0.0);
      std::span<const int> members(order.data() + start, end - start);
      std::vector<int> labels;
      for (int i : members) labels.push_back(data.y[i]);
      net.run_forward(to_columns<int>(scaled, members), trace, &dropout_rng);
      epoch_loss += net.run_backward(trace, labels, grads);
      const double inv = 1.0 / static_cast<double>(end - start);
      ++step;
      const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto &params = m.params();
      for (size_t p = 0; p < params.size(); ++p) {
        for (size_t k = 0; k < params[p].size(); ++k) {
          const double g = grads[p][k] * inv;
          moment1[p][k] = config.beta1 * moment1[p][k] + (1 - config.beta1) * g;
          moment2[p][k] = config.beta2 * moment2[p][k] + (1 - config.beta2) * g * g;
          const double mhat = moment1[p][k] / correction1;
          const double vhat = moment2[p][k] / correction2;
          params[p][k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
        }
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
    history.push_back(epoch_loss);
  }
  return history;
}

EvalMetrics evaluate(const Model &m, const Dataset &data, bool class0_is_benign) {
  if (data.x.empty() || data.x.size() != data.y.size())
    throw std::invalid_argument("evaluation data must be non-empty");
  const int k = m.num_classes();
  EvalMetrics r;
  r.confusion.assign(k, std::vector<int>(k, 0));
  int correct = 0;
  for (size_t i = 0; i < data.x.size(); ++i) {
    int actual = data.y[i];
    if (actual < 0 || actual >= k) throw std::invalid_argument("label out of range");
    int predicted = predict(m, data.x[i]);
    ++r.confusion[predicted][actual];
    correct += predicted == actual;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.x.size());
  if (class0_is_benign) {
    int benign = 0, malware = 0, benign_wrong = 0, malware_wrong = 0,
        benign_flagged = 0, malware_passed = 0;
    for (int p = 0; p < k; ++p) {
      for (int a = 0; a < k; ++a) {
        int n = r.confusion[p][a];
        if (a == 0) {
          benign += n;
          if (p != 0) benign_wrong += n, benign_flagged += n;
        } else {
          malware += n;
          if (p != a) malware_wrong += n;
          if (p == 0) malware_passed += n;
        }
      }
    }
    if (malware > 0) {
      r.reported_fpr = static_cast<double>(malware_wrong) / malware;
      r.fnr = static_cast<double>(malware_passed) / malware;
    }
    if (benign > 0) {
      r.reported_fnr = static_cast<double>(benign_wrong) / benign;
      r.fpr = static_cast<double>(benign_flagged) / benign;
    }
  }
  return r;
}

std::string metrics_json(const EvalMetrics &metrics) {
  using json = nlohmann::json;
  auto opt = [](const std::optional<double> &v) { return v ? json(*v) : json(nullptr); };
  json doc = {{"accuracy", metrics.accuracy},
              {"confusion_predicted_by_actual", metrics.confusion},
              {"reported_fpr_mislabeled_malware", opt(metrics.reported_fpr)},
              {"reported_fnr_mislabeled_benign", opt(metrics.reported_fnr)},
              {"conventional_fpr", opt(metrics.fpr)},
              {"conventional_fnr", opt(metrics.fnr)}};
  return doc.dump(1) + "\n";
}

std::string serialize_model(const Model &m) {
  Writer w;
  w.bytes(std::string_view(kMagic, 8));
  w.u32(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(m.architecture()));
  w.u32(static_cast<std::uint32_t>(m.input_width()));
  w.u32(static_cast<std::uint32_t>(m.num_classes()));
  w.u32(static_cast<std::uint32_t>(m.layers().size()));
  for (const LayerSpec &l : m.layers()) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.i32(l.in_channels);
    w.i32(l.out_channels);
    w.i32(l.kernel);
    w.i32(l.padding);
    w.i32(l.pool);
    w.i32(l.in_features);
    w.i32(l.out_features);
    w.u8(l.relu ? 1 : 0);
    w.f64(l.rate);
  }
  w.u32(static_cast<std::uint32_t>(m.scaler.min.size()));
  for (double v : m.scaler.min) w.f64(v);
  for (double v : m.scaler.max) w.f64(v);
  for (const auto &t : m.params())
    for (double v : t) w.f64(v);
  return w.take();
}

Model deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(8) != std::string_view(kMagic, 8)) throw ShapeError("not a checkpoint (bad magic)");
  if (r.u32() != kFormatVersion) throw ShapeError("unsupported checkpoint version");
  std::uint8_t arch_tag = r.u8();
  if (arch_tag > 1) throw ShapeError("unknown architecture tag");
  auto arch = static_cast<Architecture>(arch_tag);
  int width = static_cast<int>(r.u32());
  int classes = static_cast<int>(r.u32());
  std::uint32_t count = r.u32();
  if (count > 64) throw ShapeError("implausible layer count");
  std::vector<LayerSpec> layers(count);
  for (LayerSpec &l : layers) {
    l.kind = static_cast<LayerKind>(r.u8());
    l.in_channels = r.i32();
    l.out_channels = r.i32();
    l.kernel = r.i32();
    l.padding = r.i32();
    l.pool = r.i32();
    l.in_features = r.i32();
    l.out_features = r.i32();
    l.relu = r.u8() != 0;
    l.rate = r.f64();
  }
  Model m(arch, width, classes, std::move(layers));
  if (r.u32() != static_cast<std::uint32_t>(width)) throw ShapeError("scaler width mismatch");
  for (double &v : m.scaler.min) v = r.f64();
  for (double &v : m.scaler.max) v = r.f64();
  for (auto &t : m.params())
    for (double &v : t) {
      v = r.f64();
      if (!std::isfinite(v)) throw ShapeError("non-finite weight in checkpoint");
    }
  if (!r.done()) throw ShapeError("trailing bytes in checkpoint");
  return m;
}

void save_model(const Model &m, const std::filesystem::path &path) {
  write_file(path, serialize_model(m));
}

Model load_model(const std::filesystem::path &path) {
  return deserialize_model(read_file(path));
}

}  // namespace cfgsentry
