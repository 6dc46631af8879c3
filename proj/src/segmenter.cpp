#include "coda/segmenter.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "coda/error.hpp"
#include "coda/image_io.hpp"

namespace coda {

namespace {

constexpr char kCheckpointMagic[] = "CODASEG1";

}  // namespace

MlpTensors MlpTensors::zeros(const MlpDims& dims) {
  MlpTensors t;
  t.w1 = Eigen::MatrixXd::Zero(dims.hidden, dims.input);
  t.b1 = Eigen::VectorXd::Zero(dims.hidden);
  t.w2 = Eigen::MatrixXd::Zero(dims.hidden, dims.hidden);
  t.b2 = Eigen::VectorXd::Zero(dims.hidden);
  t.w3 = Eigen::MatrixXd::Zero(dims.classes, dims.hidden);
  t.b3 = Eigen::VectorXd::Zero(dims.classes);
  return t;
}

std::size_t MlpTensors::size() const {
  std::size_t n = 0;
  for_each([&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

bool MlpTensors::all_finite() const {
  bool finite = true;
  for_each([&](const auto& t) { finite = finite && t.allFinite(); });
  return finite;
}

MlpTensors& MlpTensors::operator+=(const MlpTensors& other) {
  w1 += other.w1;
  b1 += other.b1;
  w2 += other.w2;
  b2 += other.b2;
  w3 += other.w3;
  b3 += other.b3;
  return *this;
}

SegmenterState init_segmenter(std::uint64_t seed, const MlpDims& dims) {
  if (dims.input == 0 || dims.hidden == 0 || dims.classes < 2) {
    throw DimensionError("invalid segmenter dimensions");
  }
  SegmenterState state{dims, seed, MlpTensors::zeros(dims),
                       MlpTensors::zeros(dims)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Eigen::MatrixXd& w) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * normal(rng);
    }
  };
  fill(state.params.w1);
  fill(state.params.w2);
  fill(state.params.w3);
  return state;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index n = 0; n < logits.cols(); ++n) {
    const double peak = logits.col(n).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < logits.rows(); ++k) {
      probs(k, n) = std::exp(logits(k, n) - peak);
      sum += probs(k, n);
    }
    probs.col(n) /= sum;
  }
  return probs;
}

ForwardCache forward_cached(const SegmenterState& state,
                            const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.rows()) != state.dims.input) {
    throw DimensionError("feature dimension " +
                         std::to_string(features.rows()) +
                         " does not match segmenter input " +
                         std::to_string(state.dims.input));
  }
  const auto& p = state.params;
  ForwardCache cache;
  cache.input = features;
  cache.hidden1.noalias() = p.w1 * features;
  cache.hidden1.colwise() += p.b1;
  cache.hidden1 = cache.hidden1.cwiseMax(0.0);
  cache.hidden2.noalias() = p.w2 * cache.hidden1;
  cache.hidden2.colwise() += p.b2;
  cache.hidden2 = cache.hidden2.cwiseMax(0.0);
  cache.logits.noalias() = p.w3 * cache.hidden2;
  cache.logits.colwise() += p.b3;
  cache.probs = softmax_columns(cache.logits);
  return cache;
}

Eigen::MatrixXd feature_matrix(const FeatureImage& image) {
  return Eigen::Map<const Eigen::MatrixXd>(
      image.values.data(), static_cast<Eigen::Index>(image.dim),
      static_cast<Eigen::Index>(image.pixels()));
}

ProbabilityMap to_probability_map(const Eigen::MatrixXd& probs,
                                  std::size_t height, std::size_t width) {
  std::vector<double> values(probs.data(), probs.data() + probs.size());
  return ProbabilityMap(height, width, static_cast<std::size_t>(probs.rows()),
                        std::move(values));
}

Eigen::MatrixXd to_matrix(const ProbabilityMap& map) {
  return Eigen::Map<const Eigen::MatrixXd>(
      map.values().data(), static_cast<Eigen::Index>(map.classes()),
      static_cast<Eigen::Index>(map.pixels()));
}

ProbabilityMap forward(const SegmenterState& state, const FeatureImage& image) {
  const auto cache = forward_cached(state, feature_matrix(image));
  return to_probability_map(cache.probs, image.height, image.width);
}

ProbabilityMap forward(const SegmenterState& state,
                       const Eigen::MatrixXd& features) {
  const auto cache = forward_cached(state, features);
  return to_probability_map(cache.probs, 1,
                            static_cast<std::size_t>(features.cols()));
}

LossAndLogitGrad weighted_cross_entropy(const Eigen::MatrixXd& probs,
                                        const Eigen::MatrixXd& targets,
                                        std::span<const double> weights) {
  const auto n = probs.cols();
  if (targets.rows() != probs.rows() || targets.cols() != n ||
      static_cast<Eigen::Index>(weights.size()) != n) {
    throw DimensionError("cross-entropy operands have inconsistent shapes");
  }
  LossAndLogitGrad out;
  out.logit_grad = Eigen::MatrixXd::Zero(probs.rows(), n);
  for (double w : weights) {
    if (w < 0.0) throw DimensionError("negative loss weight");
    if (w > 0.0) ++out.active;
  }
  const double denom = static_cast<double>(std::max<std::size_t>(1, out.active));
  double total = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double w = weights[static_cast<std::size_t>(c)];
    if (w == 0.0) continue;
    double term = 0.0;
    for (Eigen::Index k = 0; k < probs.rows(); ++k) {
      const double t = targets(k, c);
      if (t != 0.0) term += t * std::log(std::max(probs(k, c), kLogClamp));
    }
    total -= w * term;
    out.logit_grad.col(c) = (w / denom) * (probs.col(c) - targets.col(c));
  }
  out.loss = total / denom;
  return out;
}

GradientBundle backpropagate(const SegmenterState& state,
                             const ForwardCache& cache,
                             const Eigen::MatrixXd& logit_grad) {
  const auto& p = state.params;
  GradientBundle g;
  g.w3.noalias() = logit_grad * cache.hidden2.transpose();
  g.b3 = logit_grad.rowwise().sum();
  Eigen::MatrixXd delta2 = p.w3.transpose() * logit_grad;
  delta2 = (cache.hidden2.array() > 0.0).select(delta2, 0.0);
  g.w2.noalias() = delta2 * cache.hidden1.transpose();
  g.b2 = delta2.rowwise().sum();
  Eigen::MatrixXd delta1 = p.w2.transpose() * delta2;
  delta1 = (cache.hidden1.array() > 0.0).select(delta1, 0.0);
  g.w1.noalias() = delta1 * cache.input.transpose();
  g.b1 = delta1.rowwise().sum();
  return g;
}

LossAndGradients backward_weighted_ce(
    const SegmenterState& state, const Eigen::MatrixXd& features,
    const Eigen::MatrixXd& targets, std::span<const double> weights,
    const std::optional<Eigen::MatrixXd>& logit_offsets) {
  const auto cache = forward_cached(state, features);
  const Eigen::MatrixXd probs =
      logit_offsets ? softmax_columns(cache.logits + *logit_offsets)
                    : cache.probs;
  auto ce = weighted_cross_entropy(probs, targets, weights);
  return {ce.loss, backpropagate(state, cache, ce.logit_grad)};
}

void sgd_step(SegmenterState& state, const GradientBundle& grads, double lr,
              double momentum) {
  if (!grads.all_finite()) {
    throw NonFiniteError("non-finite gradient (norms: w1=" +
                         std::to_string(grads.w1.norm()) +
                         " w2=" + std::to_string(grads.w2.norm()) +
                         " w3=" + std::to_string(grads.w3.norm()) + ")");
  }
  auto step = [&](auto& param, auto& buffer, const auto& grad) {
    buffer = momentum * buffer + grad;
    param -= lr * buffer;
  };
  auto& p = state.params;
  auto& m = state.momentum;
  step(p.w1, m.w1, grads.w1);
  step(p.b1, m.b1, grads.b1);
  step(p.w2, m.w2, grads.w2);
  step(p.b2, m.b2, grads.b2);
  step(p.w3, m.w3, grads.w3);
  step(p.b3, m.b3, grads.b3);
}

double poly_learning_rate(double base_lr, std::size_t step,
                          std::size_t max_steps, double power) {
  if (max_steps == 0 || step >= max_steps) return 0.0;
  const double frac = 1.0 - static_cast<double>(step) /
                                static_cast<double>(max_steps);
  return base_lr * std::pow(frac, power);
}

namespace {

void append_tensors(std::string& out, const MlpTensors& t) {
  t.for_each([&](const auto& tensor) {
    for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
      for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
        io::append_f64(out, tensor(r, c));
      }
    }
  });
}

void read_tensors(io::ByteReader& reader, MlpTensors& t) {
  t.for_each([&](auto& tensor) {
    for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
      for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
        tensor(r, c) = reader.f64();
      }
    }
  });
}

}  // namespace

std::string encode_checkpoint(const SegmenterState& state) {
  std::string out(kCheckpointMagic, 8);
  io::append_u32(out, static_cast<std::uint32_t>(state.dims.input));
  io::append_u32(out, static_cast<std::uint32_t>(state.dims.hidden));
  io::append_u32(out, static_cast<std::uint32_t>(state.dims.classes));
  io::append_u64(out, state.seed);
  append_tensors(out, state.params);
  append_tensors(out, state.momentum);
  return out;
}

SegmenterState decode_checkpoint(const std::string& bytes) {
  io::ByteReader reader(bytes);
  if (reader.raw(8) != std::string(kCheckpointMagic, 8)) {
    throw IoError("bad checkpoint magic");
  }
  MlpDims dims;
  dims.input = reader.u32();
  dims.hidden = reader.u32();
  dims.classes = reader.u32();
  SegmenterState state{dims, reader.u64(), MlpTensors::zeros(dims),
                       MlpTensors::zeros(dims)};
  if (reader.remaining() != 2 * state.params.size() * 8) {
    throw IoError("checkpoint payload size does not match its dimensions");
  }
  read_tensors(reader, state.params);
  read_tensors(reader, state.momentum);
  return state;
}

}  // namespace coda
