#include <doctest.h>

#include <random>

#include "coda/error.hpp"
#include "coda/types.hpp"

using namespace coda;

TEST_CASE("uniform map is an exact simplex") {
  const auto map = ProbabilityMap::uniform(3, 3, 4);
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    for (double v : map.pixel(p)) CHECK(v == 0.25);
  }
  const auto report = validate_probability_map(map);
  CHECK(report.valid);
  CHECK(report.in_range);
  CHECK(report.max_simplex_deviation == 0.0);
}

TEST_CASE("validation reports sum deviation and range failures") {
  const ProbabilityMap over(1, 1, 2, {0.5, 0.6});
  const auto r1 = validate_probability_map(over);
  CHECK_FALSE(r1.valid);
  CHECK(r1.max_simplex_deviation == doctest::Approx(0.1).epsilon(1e-12));

  const ProbabilityMap negative(1, 1, 2, {-0.1, 1.1});
  const auto r2 = validate_probability_map(negative);
  CHECK_FALSE(r2.valid);
  CHECK_FALSE(r2.in_range);
}

TEST_CASE("probability map shape checks") {
  CHECK_THROWS_AS(ProbabilityMap(1, 1, 1, {1.0}), DimensionError);
  CHECK_THROWS_AS(ProbabilityMap(2, 2, 2, {0.5, 0.5}), DimensionError);
}

TEST_CASE("one-hot encoding") {
  const auto a = one_hot(LabelMap(1, 1, 4, {2}), 4);
  CHECK(std::vector<double>(a.values().begin(), a.values().end()) ==
        std::vector<double>{0, 0, 1, 0});
  const auto b = one_hot(LabelMap(1, 1, 2, {0}), 2);
  CHECK(std::vector<double>(b.values().begin(), b.values().end()) ==
        std::vector<double>{1, 0});
  CHECK_THROWS_AS(LabelMap(1, 1, 4, {5}), InvalidLabelError);
  CHECK_THROWS_AS(LabelMap(1, 1, 4, {-1}), InvalidLabelError);
  CHECK_THROWS_AS(one_hot(LabelMap(1, 1, 6, {5}), 4), InvalidLabelError);
}

TEST_CASE("argmax with lowest-index ties") {
  const std::vector<double> a{0.1, 0.7, 0.2}, b{0.5, 0.5}, c{0.2, 0.3, 0.5};
  CHECK(argmax(a) == 1);
  CHECK(argmax(b) == 0);
  CHECK(argmax(c) == 2);
  const ProbabilityMap map(1, 2, 2, {0.5, 0.5, 0.3, 0.7});
  const auto labels = argmax_labels(map);
  CHECK(labels.at(0) == 0);
  CHECK(labels.at(1) == 1);
}

TEST_CASE("floored simplex projection") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(2 + trial % 7);
    for (auto& x : v) x = u(rng);
    if (trial % 5 == 0) v[0] = 0.0;
    project_to_floored_simplex(v);
    double sum = 0.0;
    for (double x : v) {
      CHECK(x >= kSimplexFloor);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= kSimplexTolerance);
  }
  std::vector<double> zero{0.0, 0.0, 0.0};
  project_to_floored_simplex(zero);
  for (double x : zero) CHECK(x == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("distribution matrix rows") {
  DistributionMatrix m(3, DistributionRole::labeled);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double v : m.row(i)) CHECK(v == doctest::Approx(1.0 / 3.0));
  }
  const std::vector<double> row{1.0, 0.0, 0.0};
  m.store_row(1, row);
  CHECK(m.at(1, 1) >= kSimplexFloor);
  CHECK(m.at(1, 0) == doctest::Approx(1.0));
  CHECK(m.diagonal().size() == 3);
  CHECK_THROWS_AS(DistributionMatrix::from_rows(2, DistributionRole::unlabeled,
                                                {0.5, 0.6, 0.5, 0.5}),
                  DimensionError);
}

TEST_CASE("training view hides the unlabeled ground truth") {
  DatasetSplit split;
  split.classes = 2;
  split.feature_dim = 1;
  FeatureImage img{1, 2, 1, {0.1, 0.2}};
  split.labeled.push_back({img, LabelMap(1, 2, 2, {0, 1})});
  split.unlabeled.push_back(img);
  split.hidden_truth.push_back(LabelMap(1, 2, 2, {1, 1}));
  split.labeled_ids = {0};
  split.unlabeled_ids = {1};
  validate_split(split);
  const auto view = training_data(split);
  CHECK(view.labeled.size() == 1);
  CHECK(view.unlabeled.size() == 1);
  const auto eval = evaluation_set(split);
  CHECK(eval.truth.size() == 1);

  split.unlabeled_ids = {0};
  CHECK_THROWS_AS(validate_split(split), DimensionError);
  split.unlabeled_ids = {1};
  split.unlabeled[0].values[0] = std::nan("");
  CHECK_THROWS_AS(validate_split(split), DimensionError);
}
