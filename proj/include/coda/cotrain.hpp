#pragma once

// Two-model co-training engine. Each iteration, on one labeled and one
// unlabeled pixel batch:
//   1. forward both models on both batches;
//   2. update each model's labeled distribution rows;
//   3. update each model's unlabeled distribution rows (raw argmax classes);
//   4. align unlabeled predictions and derive pseudo-labels and masks;
//   5. supervised loss on both models;
//   6. cross loss: each model's (aligned) output is supervised by the peer's
//      pseudo-labels on pixels passing the peer's mask; targets are detached;
//   7. one SGD step per model on L_s + lambda_u * L_u.

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "coda/alignment.hpp"
#include "coda/config.hpp"
#include "coda/metrics.hpp"
#include "coda/segmenter.hpp"
#include "coda/types.hpp"

namespace coda {

struct IterationRecord {
  std::size_t iteration = 0;
  double loss_supervised = 0.0;
  std::optional<double> loss_unlabeled;
  std::array<double, 2> mask_fraction{0.0, 0.0};
  std::array<std::optional<double>, 2> miou;
  std::array<std::vector<double>, 2> labeled_diag;
  std::array<std::vector<double>, 2> unlabeled_diag;

  friend bool operator==(const IterationRecord&,
                         const IterationRecord&) = default;
};

struct SupervisedLoss {
  double loss = 0.0;
  std::array<Eigen::MatrixXd, 2> logit_grad;
};

/// Mean over labeled pixels of -[log F1(y) + log F2(y)].
SupervisedLoss supervised_loss(const Eigen::MatrixXd& probs1,
                               const Eigen::MatrixXd& probs2,
                               const LabelMap& labels);

/// What one model contributes to the cross loss on an unlabeled batch.
struct PseudoView {
  Eigen::MatrixXd student_probs;  // distribution whose log the loss takes
  Eigen::MatrixXd targets;        // supervision handed to the peer
  std::vector<double> weights;    // peer's per-pixel mask
  LabelMap pseudo_labels;
};

PseudoView pseudo_view(const TrainConfig& config, const AlignmentState& state,
                       const NaiveDAState& naive,
                       const Eigen::MatrixXd& raw_probs);

struct UnlabeledLoss {
  double loss = 0.0;
  std::array<Eigen::MatrixXd, 2> logit_grad;  // already scaled by lambda_u
  std::array<double, 2> mask_fraction{0.0, 0.0};
};

/// Over-expectation cross loss: sum over both teacher -> student directions
/// of the masked mean cross-entropy. Gradients reach only the student.
UnlabeledLoss oe_cross_loss(const TrainConfig& config,
                            const std::array<PseudoView, 2>& views);

/// Pixel pools drawn from the training view, sampled with replacement.
struct PixelBatch {
  Eigen::MatrixXd features;  // dim x N
  std::vector<std::int32_t> labels;
};

class CotrainEngine {
 public:
  CotrainEngine(TrainConfig config, const TrainingData& data);

  /// Runs one iteration and returns its record (mIoU fields unset).
  IterationRecord step();

  std::size_t iteration() const { return iteration_; }
  const TrainConfig& config() const { return config_; }
  const SegmenterState& model(std::size_t m) const { return models_.at(m); }
  const AlignmentState& alignment(std::size_t m) const { return alignment_.at(m); }
  const NaiveDAState& naive(std::size_t m) const { return naive_.at(m); }
  const std::array<SegmenterState, 2>& models() const { return models_; }
  /// Augmented unlabeled features of the most recent step (empty before).
  const Eigen::MatrixXd& last_unlabeled() const { return last_unlabeled_; }

  void set_alignment(std::size_t m, AlignmentState state) {
    alignment_.at(m) = std::move(state);
  }

 private:
  PixelBatch sample_labeled();
  Eigen::MatrixXd sample_unlabeled();
  void augment_columns(Eigen::MatrixXd& features);

  TrainConfig config_;
  std::size_t classes_;
  std::array<SegmenterState, 2> models_;
  std::array<AlignmentState, 2> alignment_;
  std::array<NaiveDAState, 2> naive_;
  Eigen::MatrixXd labeled_pool_;
  std::vector<std::int32_t> labeled_pool_labels_;
  Eigen::MatrixXd unlabeled_pool_;
  Eigen::MatrixXd last_unlabeled_;
  std::mt19937_64 rng_;
  std::size_t iteration_ = 0;
};

struct ModelEvaluation {
  std::array<metrics::MetricReport, 2> models;
  std::size_t better = 0;
};

/// Metrics of both models' argmax predictions on the evaluation images.
/// Throws DimensionError on an empty evaluation set.
ModelEvaluation evaluate(const std::array<SegmenterState, 2>& models,
                         const EvalSet& eval,
                         metrics::AbsentClass absent = metrics::AbsentClass::score_one);

double miou_of(const SegmenterState& model, const EvalSet& eval,
               metrics::AbsentClass absent = metrics::AbsentClass::score_one);

struct TrainResult {
  std::array<SegmenterState, 2> models;
  std::array<AlignmentState, 2> alignment;
  std::vector<IterationRecord> records;
  // Snapshot at the best validation mIoU (either model); equals the final
  // models when no evaluation set was given.
  std::array<SegmenterState, 2> best_models;
  std::optional<double> best_miou;
  std::size_t best_iteration = 0;
};

using RecordSink = std::function<void(const IterationRecord&)>;

/// Runs max_iterations steps. Validation every eval_every iterations and at
/// the end when `eval` is given. Throws NonFiniteError on a non-finite loss;
/// records already passed to `sink` are kept by the caller.
TrainResult train(const TrainConfig& config, const TrainingData& data,
                  const EvalSet* eval = nullptr, const RecordSink& sink = {});

}  // namespace coda
