#include "coda/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "coda/error.hpp"

namespace coda {

ProbabilityMap::ProbabilityMap(std::size_t height, std::size_t width,
                               std::size_t classes, std::vector<double> values)
    : height_(height), width_(width), classes_(classes),
      values_(std::move(values)) {
  if (classes_ < 2) {
    throw DimensionError("probability map needs at least 2 classes");
  }
  if (values_.size() != height_ * width_ * classes_) {
    throw DimensionError("probability map size " +
                         std::to_string(values_.size()) + " != " +
                         std::to_string(height_ * width_ * classes_));
  }
}

ProbabilityMap ProbabilityMap::uniform(std::size_t height, std::size_t width,
                                       std::size_t classes) {
  return ProbabilityMap(height, width, classes,
                        std::vector<double>(height * width * classes,
                                            1.0 / static_cast<double>(classes)));
}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::size_t classes,
                   std::vector<std::int32_t> labels)
    : height_(height), width_(width), classes_(classes),
      labels_(std::move(labels)) {
  if (labels_.size() != height_ * width_) {
    throw DimensionError("label map size mismatch");
  }
  for (std::size_t p = 0; p < labels_.size(); ++p) {
    if (labels_[p] < 0 || static_cast<std::size_t>(labels_[p]) >= classes_) {
      throw InvalidLabelError("label " + std::to_string(labels_[p]) +
                              " at pixel " + std::to_string(p) +
                              " outside [0, " + std::to_string(classes_) + ")");
    }
  }
}

ProbabilityReport validate_probability_map(const ProbabilityMap& map) {
  ProbabilityReport report;
  report.min_entry = map.pixels() ? 1.0 : 0.0;
  report.max_entry = 0.0;
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    double sum = 0.0;
    for (double v : map.pixel(p)) {
      sum += v;
      report.min_entry = std::min(report.min_entry, v);
      report.max_entry = std::max(report.max_entry, v);
    }
    report.max_simplex_deviation =
        std::max(report.max_simplex_deviation, std::abs(sum - 1.0));
  }
  report.in_range = report.min_entry >= 0.0 && report.max_entry <= 1.0;
  report.valid = report.in_range && map.classes() >= 2 &&
                 report.max_simplex_deviation <= kSimplexTolerance;
  return report;
}

ProbabilityMap one_hot(const LabelMap& labels, std::size_t classes) {
  std::vector<double> values(labels.pixels() * classes, 0.0);
  for (std::size_t p = 0; p < labels.pixels(); ++p) {
    const auto label = labels.at(p);
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw InvalidLabelError("label " + std::to_string(label) +
                              " not valid for K=" + std::to_string(classes));
    }
    values[p * classes + static_cast<std::size_t>(label)] = 1.0;
  }
  return ProbabilityMap(labels.height(), labels.width(), classes,
                        std::move(values));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

LabelMap argmax_labels(const ProbabilityMap& map) {
  std::vector<std::int32_t> labels(map.pixels());
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    labels[p] = static_cast<std::int32_t>(argmax(map.pixel(p)));
  }
  return LabelMap(map.height(), map.width(), map.classes(), std::move(labels));
}

void project_to_floored_simplex(std::span<double> values, double floor) {
  const std::size_t n = values.size();
  if (n == 0) return;
  double sum = 0.0;
  for (double& v : values) {
    if (!(v > 0.0)) v = 0.0;
    sum += v;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    std::fill(values.begin(), values.end(), 1.0 / static_cast<double>(n));
    return;
  }
  for (double& v : values) v /= sum;

  std::vector<bool> pinned(n, false);
  for (;;) {
    std::size_t pinned_count = 0;
    double free_mass = 0.0;
    bool changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!pinned[k] && values[k] < floor) {
        pinned[k] = true;
        changed = true;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (pinned[k]) {
        ++pinned_count;
      } else {
        free_mass += values[k];
      }
    }
    const double target = 1.0 - floor * static_cast<double>(pinned_count);
    for (std::size_t k = 0; k < n; ++k) {
      values[k] = pinned[k] ? floor : values[k] * (target / free_mass);
    }
    if (!changed) break;
  }
}

DistributionMatrix::DistributionMatrix(std::size_t classes,
                                       DistributionRole role)
    : classes_(classes), role_(role),
      values_(classes * classes, 1.0 / static_cast<double>(classes)) {
  if (classes < 2) throw DimensionError("distribution matrix needs K >= 2");
}

DistributionMatrix DistributionMatrix::from_rows(std::size_t classes,
                                                DistributionRole role,
                                                std::vector<double> values) {
  DistributionMatrix m(classes, role);
  if (values.size() != classes * classes) {
    throw DimensionError("distribution matrix needs K*K values");
  }
  for (std::size_t i = 0; i < classes; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      const double v = values[i * classes + j];
      if (!(v >= kSimplexFloor * (1.0 - 1e-6)) || v > 1.0) {
        throw DimensionError("distribution row " + std::to_string(i) +
                             " has an entry outside [floor, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      throw DimensionError("distribution row " + std::to_string(i) +
                           " does not sum to 1");
    }
  }
  m.values_ = std::move(values);
  return m;
}

std::vector<double> DistributionMatrix::diagonal() const {
  std::vector<double> d(classes_);
  for (std::size_t i = 0; i < classes_; ++i) d[i] = at(i, i);
  return d;
}

void DistributionMatrix::store_row(std::size_t i, std::span<const double> row) {
  if (i >= classes_ || row.size() != classes_) {
    throw DimensionError("distribution row shape mismatch");
  }
  auto target = std::span<double>(values_.data() + i * classes_, classes_);
  std::copy(row.begin(), row.end(), target.begin());
  project_to_floored_simplex(target);
}

TrainingData training_data(const DatasetSplit& split) {
  return {split.classes, split.feature_dim, split.labeled, split.unlabeled};
}

EvalSet evaluation_set(const DatasetSplit& split) {
  return {split.unlabeled, split.hidden_truth};
}

namespace {

void check_features(const FeatureImage& image, std::size_t dim) {
  if (image.dim != dim || image.values.size() != image.pixels() * dim) {
    throw DimensionError("feature image has inconsistent dimension");
  }
  for (double v : image.values) {
    if (!std::isfinite(v)) throw DimensionError("non-finite feature value");
  }
}

}  // namespace

void validate_split(const DatasetSplit& split) {
  for (const auto& sample : split.labeled) {
    check_features(sample.features, split.feature_dim);
    if (sample.labels.height() != sample.features.height ||
        sample.labels.width() != sample.features.width ||
        sample.labels.classes() != split.classes) {
      throw DimensionError("labeled sample shape mismatch");
    }
  }
  for (const auto& image : split.unlabeled) {
    check_features(image, split.feature_dim);
  }
  if (split.hidden_truth.size() != split.unlabeled.size()) {
    throw DimensionError("hidden truth count differs from unlabeled count");
  }
  if (split.labeled_ids.size() != split.labeled.size() ||
      split.unlabeled_ids.size() != split.unlabeled.size()) {
    throw DimensionError("split id lists do not match sample counts");
  }
  std::set<std::size_t> seen(split.labeled_ids.begin(),
                             split.labeled_ids.end());
  for (auto id : split.unlabeled_ids) {
    if (!seen.insert(id).second) {
      throw DimensionError("image " + std::to_string(id) +
                           " is both labeled and unlabeled");
    }
  }
}

}  // namespace coda
