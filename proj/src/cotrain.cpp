#include "coda/cotrain.hpp"

#include <cmath>
#include <string>

#include "coda/error.hpp"
#include "coda/synthdata.hpp"

namespace coda {

namespace {

Eigen::MatrixXd one_hot_matrix(const LabelMap& labels, std::size_t classes) {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes),
                            static_cast<Eigen::Index>(labels.pixels()));
  for (std::size_t p = 0; p < labels.pixels(); ++p) {
    out(labels.at(p), static_cast<Eigen::Index>(p)) = 1.0;
  }
  return out;
}

LabelMap batch_labels(std::span<const std::int32_t> labels, std::size_t classes) {
  return LabelMap(1, labels.size(), classes,
                  std::vector<std::int32_t>(labels.begin(), labels.end()));
}

}  // namespace

SupervisedLoss supervised_loss(const Eigen::MatrixXd& probs1,
                               const Eigen::MatrixXd& probs2,
                               const LabelMap& labels) {
  if (probs1.cols() != static_cast<Eigen::Index>(labels.pixels()) ||
      probs2.cols() != probs1.cols() || probs1.rows() != probs2.rows()) {
    throw DimensionError("supervised loss operands differ in shape");
  }
  const auto targets =
      one_hot_matrix(labels, static_cast<std::size_t>(probs1.rows()));
  const std::vector<double> weights(labels.pixels(), 1.0);
  auto first = weighted_cross_entropy(probs1, targets, weights);
  auto second = weighted_cross_entropy(probs2, targets, weights);
  return {first.loss + second.loss,
          {std::move(first.logit_grad), std::move(second.logit_grad)}};
}

PseudoView pseudo_view(const TrainConfig& config, const AlignmentState& state,
                       const NaiveDAState& naive,
                       const Eigen::MatrixXd& raw_probs) {
  const auto classes = static_cast<std::size_t>(raw_probs.rows());
  const auto n = static_cast<std::size_t>(raw_probs.cols());
  const auto raw = to_probability_map(raw_probs, 1, n);
  PseudoView view;
  view.weights.assign(n, 1.0);
  switch (config.mode) {
    case TrainMode::supervised_only:
      throw ConfigError("supervised_only runs have no pseudo-labels");
    case TrainMode::cotrain:
      view.student_probs = raw_probs;
      view.pseudo_labels = argmax_labels(raw);
      break;
    case TrainMode::cotrain_da: {
      const auto aligned = naive_da_align(naive, raw);
      view.student_probs = to_matrix(aligned);
      view.pseudo_labels = argmax_labels(aligned);
      break;
    }
    case TrainMode::cotrain_oe: {
      auto masked = threshold_map(state, raw, config.threshold);
      view.student_probs = raw_probs;
      view.pseudo_labels = std::move(masked.pseudo_labels);
      for (std::size_t p = 0; p < n; ++p) view.weights[p] = masked.mask[p];
      break;
    }
    case TrainMode::cotrain_coda:
    case TrainMode::coda_oe: {
      auto aligned = align_map(state, raw, config.threshold, config.confidence);
      view.student_probs = to_matrix(aligned.aligned);
      view.pseudo_labels = std::move(aligned.pseudo_labels);
      if (config.mode == TrainMode::coda_oe) {
        for (std::size_t p = 0; p < n; ++p) view.weights[p] = aligned.mask[p];
      }
      break;
    }
  }
  view.targets = config.soft_targets ? view.student_probs
                                     : one_hot_matrix(view.pseudo_labels, classes);
  return view;
}

UnlabeledLoss oe_cross_loss(const TrainConfig& config,
                            const std::array<PseudoView, 2>& views) {
  UnlabeledLoss out;
  for (std::size_t student = 0; student < 2; ++student) {
    const auto& teacher = views[1 - student];
    auto ce = weighted_cross_entropy(views[student].student_probs,
                                     teacher.targets, teacher.weights);
    out.loss += ce.loss;
    out.logit_grad[student] = config.lambda_u * ce.logit_grad;
    const auto n = teacher.weights.size();
    out.mask_fraction[1 - student] =
        n ? static_cast<double>(ce.active) / static_cast<double>(n) : 0.0;
  }
  return out;
}

CotrainEngine::CotrainEngine(TrainConfig config, const TrainingData& data)
    : config_(std::move(config)), classes_(data.classes),
      rng_(config_.seed_sampling) {
  validate(config_);
  if (data.labeled.empty()) throw DimensionError("training needs labeled images");
  if (uses_unlabeled(config_.mode) && data.unlabeled.empty()) {
    throw DimensionError("mode " + to_string(config_.mode) +
                         " needs unlabeled images");
  }
  const MlpDims dims{data.feature_dim, config_.hidden, classes_};
  models_ = {init_segmenter(config_.seed_model_1, dims),
             init_segmenter(config_.seed_model_2, dims)};
  alignment_ = {AlignmentState::uniform(classes_, config_.alpha),
                AlignmentState::uniform(classes_, config_.alpha)};

  std::size_t labeled_pixels = 0;
  std::vector<LabelMap> labeled_maps;
  for (const auto& sample : data.labeled) {
    labeled_pixels += sample.features.pixels();
    labeled_maps.push_back(sample.labels);
  }
  // The plain alignment baseline divides by the labeled class frequencies.
  NaiveDAState naive = NaiveDAState::uniform(classes_, config_.alpha);
  naive.labeled_dist = synth::empirical_distribution(labeled_maps);
  project_to_floored_simplex(naive.labeled_dist);
  naive_ = {naive, naive};

  const auto dim = static_cast<Eigen::Index>(data.feature_dim);
  labeled_pool_.resize(dim, static_cast<Eigen::Index>(labeled_pixels));
  labeled_pool_labels_.reserve(labeled_pixels);
  Eigen::Index col = 0;
  for (const auto& sample : data.labeled) {
    const auto n = static_cast<Eigen::Index>(sample.features.pixels());
    labeled_pool_.middleCols(col, n) = feature_matrix(sample.features);
    col += n;
    const auto labels = sample.labels.labels();
    labeled_pool_labels_.insert(labeled_pool_labels_.end(), labels.begin(),
                                labels.end());
  }
  std::size_t unlabeled_pixels = 0;
  for (const auto& image : data.unlabeled) unlabeled_pixels += image.pixels();
  unlabeled_pool_.resize(dim, static_cast<Eigen::Index>(unlabeled_pixels));
  col = 0;
  for (const auto& image : data.unlabeled) {
    const auto n = static_cast<Eigen::Index>(image.pixels());
    unlabeled_pool_.middleCols(col, n) = feature_matrix(image);
    col += n;
  }
}

void CotrainEngine::augment_columns(Eigen::MatrixXd& features) {
  std::bernoulli_distribution flip(config_.flip_probability);
  std::normal_distribution<double> noise(0.0, config_.augment_sigma);
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    if (flip(rng_)) {
      synth::flip_pixel_features(
          std::span<double>(features.col(c).data(),
                            static_cast<std::size_t>(features.rows())));
    }
    if (config_.augment_sigma > 0.0) {
      features(kFeatureIntensity, c) += noise(rng_);
      if (features.rows() > static_cast<Eigen::Index>(kFeatureLocalMean)) {
        features(kFeatureLocalMean, c) += noise(rng_);
      }
    }
  }
}

PixelBatch CotrainEngine::sample_labeled() {
  std::uniform_int_distribution<Eigen::Index> pick(0, labeled_pool_.cols() - 1);
  PixelBatch batch;
  batch.features.resize(labeled_pool_.rows(),
                        static_cast<Eigen::Index>(config_.batch_labeled));
  batch.labels.resize(config_.batch_labeled);
  for (std::size_t i = 0; i < config_.batch_labeled; ++i) {
    const auto idx = pick(rng_);
    batch.features.col(static_cast<Eigen::Index>(i)) = labeled_pool_.col(idx);
    batch.labels[i] = labeled_pool_labels_[static_cast<std::size_t>(idx)];
  }
  augment_columns(batch.features);
  return batch;
}

Eigen::MatrixXd CotrainEngine::sample_unlabeled() {
  std::uniform_int_distribution<Eigen::Index> pick(0, unlabeled_pool_.cols() - 1);
  Eigen::MatrixXd features(unlabeled_pool_.rows(),
                           static_cast<Eigen::Index>(config_.batch_unlabeled));
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    features.col(i) = unlabeled_pool_.col(pick(rng_));
  }
  augment_columns(features);
  return features;
}

IterationRecord CotrainEngine::step() {
  const bool semi = uses_unlabeled(config_.mode);
  const auto labeled = sample_labeled();
  const auto labels = batch_labels(labeled.labels, classes_);
  Eigen::MatrixXd unlabeled;
  if (semi) {
    unlabeled = sample_unlabeled();
    last_unlabeled_ = unlabeled;
  }

  std::array<ForwardCache, 2> lab_cache, unl_cache;
  for (std::size_t m = 0; m < 2; ++m) {
    lab_cache[m] = forward_cached(models_[m], labeled.features);
    if (semi) unl_cache[m] = forward_cached(models_[m], unlabeled);
  }

  IterationRecord record;
  record.iteration = iteration_ + 1;

  if (!config_.freeze_alignment) {
    for (std::size_t m = 0; m < 2; ++m) {
      const auto probs = to_probability_map(lab_cache[m].probs, 1, labeled.labels.size());
      update_labeled(alignment_[m], probs, labels);
    }
    if (semi) {
      for (std::size_t m = 0; m < 2; ++m) {
        const auto probs = to_probability_map(
            unl_cache[m].probs, 1, static_cast<std::size_t>(unlabeled.cols()));
        update_unlabeled(alignment_[m], probs, argmax_labels(probs));
        if (config_.mode == TrainMode::cotrain_da) {
          update_naive_unlabeled(naive_[m], probs);
        }
      }
    }
  }

  auto sup = supervised_loss(lab_cache[0].probs, lab_cache[1].probs, labels);
  record.loss_supervised = sup.loss;
  std::array<GradientBundle, 2> grads{
      backpropagate(models_[0], lab_cache[0], sup.logit_grad[0]),
      backpropagate(models_[1], lab_cache[1], sup.logit_grad[1])};

  if (semi) {
    std::array<PseudoView, 2> views{
        pseudo_view(config_, alignment_[0], naive_[0], unl_cache[0].probs),
        pseudo_view(config_, alignment_[1], naive_[1], unl_cache[1].probs)};
    const auto cross = oe_cross_loss(config_, views);
    record.loss_unlabeled = cross.loss;
    record.mask_fraction = cross.mask_fraction;
    for (std::size_t m = 0; m < 2; ++m) {
      grads[m] += backpropagate(models_[m], unl_cache[m], cross.logit_grad[m]);
    }
  }

  for (std::size_t m = 0; m < 2; ++m) {
    record.labeled_diag[m] = alignment_[m].labeled.diagonal();
    record.unlabeled_diag[m] = alignment_[m].unlabeled.diagonal();
  }
  if (!std::isfinite(record.loss_supervised) ||
      (record.loss_unlabeled && !std::isfinite(*record.loss_unlabeled))) {
    throw NonFiniteError("non-finite loss at iteration " +
                         std::to_string(record.iteration) +
                         ": L_s=" + std::to_string(record.loss_supervised) +
                         " L_u=" + std::to_string(record.loss_unlabeled.value_or(0.0)));
  }

  const double lr = poly_learning_rate(config_.lr, iteration_,
                                       config_.max_iterations, config_.lr_power);
  for (std::size_t m = 0; m < 2; ++m) {
    sgd_step(models_[m], grads[m], lr, config_.momentum);
  }
  ++iteration_;
  return record;
}

double miou_of(const SegmenterState& model, const EvalSet& eval,
               metrics::AbsentClass absent) {
  if (eval.images.empty()) throw DimensionError("empty evaluation set");
  metrics::ConfusionCounts counts(eval.truth.front().classes());
  for (std::size_t i = 0; i < eval.images.size(); ++i) {
    metrics::accumulate(counts, argmax_labels(forward(model, eval.images[i])),
                        eval.truth[i]);
  }
  return metrics::miou(counts, absent);
}

ModelEvaluation evaluate(const std::array<SegmenterState, 2>& models,
                         const EvalSet& eval, metrics::AbsentClass absent) {
  if (eval.images.empty() || eval.images.size() != eval.truth.size()) {
    throw DimensionError("evaluation needs a non-empty image/truth set");
  }
  ModelEvaluation out;
  for (std::size_t m = 0; m < 2; ++m) {
    if (models[m].dims.classes != eval.truth.front().classes() ||
        models[m].dims.input != eval.images.front().dim) {
      throw DimensionError("model dimensions do not match the evaluation set");
    }
    std::vector<LabelMap> predictions;
    predictions.reserve(eval.images.size());
    for (const auto& image : eval.images) {
      predictions.push_back(argmax_labels(forward(models[m], image)));
    }
    out.models[m] = metrics::evaluate_segmentation(predictions, eval.truth, absent);
  }
  out.better = out.models[1].miou > out.models[0].miou ? 1 : 0;
  return out;
}

TrainResult train(const TrainConfig& config, const TrainingData& data,
                  const EvalSet* eval, const RecordSink& sink) {
  CotrainEngine engine(config, data);
  TrainResult result;
  result.best_models = engine.models();
  const bool validating = eval != nullptr && !eval->images.empty();
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    auto record = engine.step();
    const bool last = record.iteration == config.max_iterations;
    if (validating &&
        ((config.eval_every && record.iteration % config.eval_every == 0) || last)) {
      for (std::size_t m = 0; m < 2; ++m) {
        record.miou[m] = miou_of(engine.model(m), *eval, config.absent_class);
      }
      const double score = std::max(*record.miou[0], *record.miou[1]);
      if (!result.best_miou || score > *result.best_miou) {
        result.best_miou = score;
        result.best_iteration = record.iteration;
        result.best_models = engine.models();
      }
    }
    if (sink) sink(record);
    result.records.push_back(std::move(record));
  }
  result.models = engine.models();
  if (!validating) result.best_models = result.models;
  result.alignment = {engine.alignment(0), engine.alignment(1)};
  return result;
}

}  // namespace coda
