#pragma once

// Mode matrix and threshold sweep over a seed list on one dataset.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coda/config.hpp"
#include "coda/types.hpp"

namespace coda {

struct AblationRun {
  TrainMode mode = TrainMode::coda_oe;
  ThresholdRule threshold = ThresholdRule::dynamic();
  std::uint64_t seed = 1;
};

struct AblationRow {
  AblationRun run;
  double miou = 0.0;
  double minority_iou = 0.0;
};

/// Per seed: supervised_only, cotrain, cotrain_da, cotrain_oe, cotrain_coda,
/// then coda_oe with the dynamic threshold and statics 0.5 to 0.9.
std::vector<AblationRun> ablation_plan(const std::vector<std::uint64_t>& seeds);

/// Static thresholds of the sweep.
std::vector<double> static_threshold_grid();

/// Classes whose pixel share in the labeled ground truth is below 3%, or the
/// single rarest class when none is.
std::vector<std::size_t> minority_classes(const DatasetSplit& split);

/// Trains one run with `base` overridden by the run's mode, threshold and
/// seeds, and scores the final model with the higher evaluation mIoU.
AblationRow run_ablation(const TrainConfig& base, const DatasetSplit& split,
                         const AblationRun& run);

/// Runs the plan on up to `workers` threads. Rows keep plan order.
std::vector<AblationRow> run_ablations(
    const TrainConfig& base, const DatasetSplit& split,
    const std::vector<AblationRun>& plan, std::size_t workers,
    const std::function<void(const AblationRow&)>& on_done = {});

struct AblationAggregate {
  TrainMode mode;
  ThresholdRule threshold;
  std::size_t count = 0;
  double miou_mean = 0.0;
  double miou_std = 0.0;  // sample standard deviation, 0 for one run
  double minority_mean = 0.0;
  double minority_std = 0.0;
};

/// One aggregate per (mode, threshold) in first-appearance order.
std::vector<AblationAggregate> aggregate(const std::vector<AblationRow>& rows);

/// Columns mode,threshold,seed,mIoU,minority_IoU. Aggregate rows follow with
/// seed "mean" and "std".
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace coda
