#pragma once

// Per-pixel multilayer perceptron d -> h -> h -> K with rectifier hidden
// layers and a softmax output, trained by explicit backpropagation and SGD
// with momentum. Batches are column matrices: one column per pixel.

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "coda/types.hpp"

namespace coda {

inline constexpr double kLogClamp = 1e-12;

struct MlpDims {
  std::size_t input = kDefaultFeatureDim;
  std::size_t hidden = 32;
  std::size_t classes = 2;

  friend bool operator==(const MlpDims&, const MlpDims&) = default;
};

/// Weights and biases in declaration order. The same layout holds
/// parameters, momentum buffers and gradients.
struct MlpTensors {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x hidden
  Eigen::VectorXd b2;
  Eigen::MatrixXd w3;  // classes x hidden
  Eigen::VectorXd b3;

  static MlpTensors zeros(const MlpDims& dims);

  template <typename F>
  void for_each(F&& f) {
    f(w1); f(b1); f(w2); f(b2); f(w3); f(b3);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(w1); f(b1); f(w2); f(b2); f(w3); f(b3);
  }

  std::size_t size() const;
  bool all_finite() const;
  MlpTensors& operator+=(const MlpTensors& other);

  friend bool operator==(const MlpTensors& a, const MlpTensors& b) {
    return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 &&
           a.w3 == b.w3 && a.b3 == b.b3;
  }
};

using GradientBundle = MlpTensors;

struct SegmenterState {
  MlpDims dims;
  std::uint64_t seed = 0;
  MlpTensors params;
  MlpTensors momentum;

  friend bool operator==(const SegmenterState&,
                         const SegmenterState&) = default;
};

/// Weights ~ N(0, 1/fan_in), zero biases, zero momentum.
SegmenterState init_segmenter(std::uint64_t seed, const MlpDims& dims);

/// Activations kept for backpropagation.
struct ForwardCache {
  Eigen::MatrixXd input;   // input x N
  Eigen::MatrixXd hidden1; // post-activation
  Eigen::MatrixXd hidden2;
  Eigen::MatrixXd logits;  // classes x N
  Eigen::MatrixXd probs;   // softmax(logits)
};

ForwardCache forward_cached(const SegmenterState& state,
                            const Eigen::MatrixXd& features);

/// Column-wise softmax with max subtraction.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

/// Views a feature image as an input x N matrix.
Eigen::MatrixXd feature_matrix(const FeatureImage& image);

/// Copies a classes x N probability matrix into a map of the given shape.
ProbabilityMap to_probability_map(const Eigen::MatrixXd& probs,
                                  std::size_t height, std::size_t width);
Eigen::MatrixXd to_matrix(const ProbabilityMap& map);

ProbabilityMap forward(const SegmenterState& state, const FeatureImage& image);
ProbabilityMap forward(const SegmenterState& state,
                       const Eigen::MatrixXd& features);

struct LossAndLogitGrad {
  double loss = 0.0;
  Eigen::MatrixXd logit_grad;  // classes x N
  std::size_t active = 0;      // pixels with positive weight
};

/// loss = -(sum_p w_p sum_k t_pk log max(q_pk, 1e-12)) / max(1, #{w_p > 0})
/// with logit gradient w_p (q_p - t_p) / max(1, #{w_p > 0}). `probs` is the
/// distribution q whose logits are differentiated; it may carry fixed logit
/// offsets.
LossAndLogitGrad weighted_cross_entropy(const Eigen::MatrixXd& probs,
                                        const Eigen::MatrixXd& targets,
                                        std::span<const double> weights);

GradientBundle backpropagate(const SegmenterState& state,
                             const ForwardCache& cache,
                             const Eigen::MatrixXd& logit_grad);

struct LossAndGradients {
  double loss = 0.0;
  GradientBundle grads;
};

/// Weighted cross-entropy of softmax(logits + offsets) against `targets`.
/// Offsets, when given, are classes x N constants (no gradient).
LossAndGradients backward_weighted_ce(
    const SegmenterState& state, const Eigen::MatrixXd& features,
    const Eigen::MatrixXd& targets, std::span<const double> weights,
    const std::optional<Eigen::MatrixXd>& logit_offsets = std::nullopt);

/// buffer <- momentum * buffer + grad; param <- param - lr * buffer.
/// Throws NonFiniteError when a gradient entry is not finite.
void sgd_step(SegmenterState& state, const GradientBundle& grads, double lr,
              double momentum);

/// lr * (1 - step / max_steps)^power
double poly_learning_rate(double base_lr, std::size_t step,
                          std::size_t max_steps, double power = 0.9);

/// "CODASEG1", u32 input, u32 hidden, u32 classes, u64 seed, then parameters
/// and momentum buffers as little-endian float64 in declaration order
/// (matrices row-major).
std::string encode_checkpoint(const SegmenterState& state);
SegmenterState decode_checkpoint(const std::string& bytes);

}  // namespace coda
