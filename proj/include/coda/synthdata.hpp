#pragma once

// Deterministic 2D multi-class scenes with controllable long-tail class
// imbalance. Class 0 is background; classes 1..K-1 are painted as disks,
// rectangles or rings in class order, so rarer classes are drawn last.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coda/types.hpp"

namespace coda::synth {

enum class ShapeKind { disk, rectangle, ring };

struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t classes = 5;
  std::vector<double> frequencies;  // simplex, one per class
  std::vector<double> class_means;  // intensity means, one per class
  std::vector<ShapeKind> palette{ShapeKind::disk, ShapeKind::rectangle,
                                 ShapeKind::ring};
  double noise_sigma = 0.15;
  double labeled_fraction = 0.1;
  std::size_t images = 50;
  std::uint64_t seed = 7;
};

/// Frequencies proportional to rho^(-k/(K-1)), k = 0..K-1.
std::vector<double> long_tail_frequencies(std::size_t classes, double rho);

/// Evenly spaced means in [0.1, 0.9].
std::vector<double> spaced_means(std::size_t classes);

/// 64x64, K=5, frequencies proportional to (1, 1/3, 1/9, 1/27, 1/54),
/// sigma 0.15, means (0.1, 0.3, 0.5, 0.7, 0.9), 10% labeled, 50 images.
SceneSpec tail5();

/// Throws ConfigError on an invalid spec.
void validate_spec(const SceneSpec& spec);

struct Scene {
  std::vector<double> intensity;
  LabelMap labels;
};

/// One image. Throws GenerationError when a class target cannot be reached.
Scene generate_scene(const SceneSpec& spec, std::mt19937_64& rng);

/// Intensity, normalized row, normalized column, 3x3 mean, 3x3 variance,
/// each rounded to float precision so the on-disk form is exact.
FeatureImage compute_features(std::span<const double> intensity,
                              std::size_t height, std::size_t width);

/// Images are generated in order; the first round(labeled_fraction * n)
/// (at least one) of a seeded permutation are labeled.
DatasetSplit generate(const SceneSpec& spec);

/// Mirror of a feature vector across the vertical axis: the column
/// coordinate becomes 1 - column. Local statistics are mirror-invariant.
void flip_pixel_features(std::span<double> pixel);

struct AugmentOptions {
  double flip_probability = 0.5;
  double noise_sigma = 0.0;
};

/// Horizontal flip with the given probability plus Gaussian feature noise
/// on the intensity-derived channels.
LabeledImage augment(const LabeledImage& sample, const AugmentOptions& options,
                     std::mt19937_64& rng);

/// Normalized class-pixel counts. Throws DimensionError on an empty set.
std::vector<double> empirical_distribution(std::span<const LabelMap> maps);

}  // namespace coda::synth
