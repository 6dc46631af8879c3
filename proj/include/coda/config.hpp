#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "coda/alignment.hpp"
#include "coda/metrics.hpp"

namespace coda {

/// Which loss terms and pseudo-label transforms a run uses.
enum class TrainMode {
  supervised_only,  // labeled loss only
  cotrain,          // plain cross pseudo supervision
  cotrain_da,       // + single overall distribution alignment
  cotrain_oe,       // + over-expectation mask, no alignment
  cotrain_coda,     // + class-wise alignment, no mask
  coda_oe,          // class-wise alignment and over-expectation mask
};

std::string to_string(TrainMode mode);
TrainMode parse_mode(const std::string& text);

bool uses_unlabeled(TrainMode mode);
bool uses_classwise_alignment(TrainMode mode);
bool uses_mask(TrainMode mode);

std::string to_string(const ThresholdRule& rule);
ThresholdRule parse_threshold(const std::string& text);

struct TrainConfig {
  std::uint64_t seed_model_1 = 1;
  std::uint64_t seed_model_2 = 2;
  std::uint64_t seed_sampling = 3;
  double alpha = kDefaultEmaMomentum;
  double lr = 0.05;
  double momentum = 0.9;
  double lr_power = 0.9;
  std::size_t batch_labeled = 1024;
  std::size_t batch_unlabeled = 1024;
  std::size_t max_iterations = 5000;
  std::size_t hidden = 32;
  TrainMode mode = TrainMode::coda_oe;
  ThresholdRule threshold = ThresholdRule::dynamic();
  ConfidenceSource confidence = ConfidenceSource::raw;
  double lambda_u = 1.0;
  bool soft_targets = false;
  // Keeps both distribution matrices at their uniform initial value.
  bool freeze_alignment = false;
  double flip_probability = 0.5;
  double augment_sigma = 0.0;
  std::size_t eval_every = 200;
  metrics::AbsentClass absent_class = metrics::AbsentClass::score_one;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Seeds for run `seed` of a sweep: models 1000s+1 and 1000s+2, sampling
/// 1000s+3.
void apply_run_seed(TrainConfig& config, std::uint64_t seed);

/// Throws ConfigError listing every offending key.
void validate(const TrainConfig& config);

/// Flat `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values are collected and reported together in one ConfigError.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);
std::string format_config(const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& config);

}  // namespace coda
