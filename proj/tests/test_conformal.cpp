#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "veriprobe/conformal.hpp"

using namespace veriprobe;

TEST(Conformal, BinaryNonconformity) {
  EXPECT_DOUBLE_EQ(binary_nc(0.0, 1), 1.0);
  EXPECT_NEAR(binary_nc(2.0, 1), 0.1353352832366127, 1e-15);
  EXPECT_NEAR(binary_nc(2.0, -1), 7.38905609893065, 1e-13);
}

TEST(Conformal, MulticlassNonconformity) {
  EXPECT_DOUBLE_EQ(multiclass_nc(std::vector<double>{1, 0, 0}, 0), 0.0);
  for (int y = 0; y < 3; ++y) EXPECT_NEAR(multiclass_nc(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, y), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(multiclass_nc(std::vector<double>{0, 1, 0}, 0), 1.0);
  EXPECT_THROW(multiclass_nc(std::vector<double>{0.5, 0.6, 0.0}, 0), Error);
}

TEST(Conformal, CalibrationSortsScores) {
  const std::vector<BinarySample> one{{0.3, 1}};
  EXPECT_EQ(calibrate(std::span<const BinarySample>(one), 0.1).scores.size(), 1u);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<BinarySample> samples;
  std::vector<double> expected;
  for (int i = 0; i < 50; ++i) {
    samples.push_back({n(rng), i % 2 ? 1 : -1});
    expected.push_back(std::exp(-samples.back().label * samples.back().score));
  }
  std::stable_sort(expected.begin(), expected.end());
  EXPECT_EQ(calibrate(std::span<const BinarySample>(samples), 0.1).scores, expected);
  EXPECT_THROW(calibrate(std::span<const BinarySample>(), 0.1), Error);
}

TEST(Conformal, ThresholdRankRule) {
  ConformalCalibration cal{ConformalMode::binary, {1, 2, 3, 4, 5, 6, 7, 8, 9}, 0.1};
  EXPECT_DOUBLE_EQ(cal.threshold(), 9.0);  // ceil(10 * 0.9) = 9
  cal.alpha = 0.05;
  EXPECT_TRUE(std::isinf(cal.threshold()));  // rank 10 > n
  cal.alpha = 0.5;
  EXPECT_DOUBLE_EQ(cal.threshold(), 5.0);
}

TEST(Conformal, PredictionSetBoundaries) {
  const ConformalCalibration cal{ConformalMode::multiclass, {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95}, 0.1};
  EXPECT_EQ(prediction_set(cal, std::vector<double>{0.0, 2.0}), std::vector<int>{0});
  EXPECT_EQ(prediction_set(cal, std::vector<double>{2.0, 3.0}), std::vector<int>{});
  // A tie with the threshold is not covered.
  EXPECT_EQ(prediction_set(cal, std::vector<double>{0.95, 0.1}), std::vector<int>{1});
  EXPECT_EQ(decide(std::vector<int>{1}), 1);
  EXPECT_FALSE(decide(std::vector<int>{}).has_value());
  EXPECT_FALSE(decide(std::vector<int>{0, 1}).has_value());
}

TEST(Conformal, ShrinkingAlphaNeverShrinksSets) {
  std::mt19937_64 rng(4);
  const auto cal_data = fixture::gaussian_three_class(rng, 200);
  const auto test_data = fixture::gaussian_three_class(rng, 100);
  std::vector<MulticlassSample> samples;
  for (const auto& s : cal_data) samples.push_back({s.p, s.label});
  std::vector<std::size_t> previous(test_data.size(), 0);
  for (double alpha : {0.5, 0.3, 0.2, 0.1, 0.05, 0.01}) {
    const auto cal = calibrate(std::span<const MulticlassSample>(samples), alpha);
    for (std::size_t i = 0; i < test_data.size(); ++i) {
      const auto set = prediction_set(cal, multiclass_candidates(test_data[i].p));
      EXPECT_GE(set.size(), previous[i]);
      previous[i] = set.size();
    }
  }
}

TEST(Conformal, MonotoneTransformInvariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<double> scores(100);
  for (auto& s : scores) s = n(rng);
  auto a = calibrate_from_nonconformity(scores, 0.1, ConformalMode::binary);
  std::vector<double> transformed;
  for (double s : scores) transformed.push_back(std::exp(3 * s) + 2);
  auto b = calibrate_from_nonconformity(transformed, 0.1, ConformalMode::binary);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> cand{n(rng), n(rng)};
    const std::vector<double> cand_t{std::exp(3 * cand[0]) + 2, std::exp(3 * cand[1]) + 2};
    EXPECT_EQ(prediction_set(a, cand), prediction_set(b, cand_t));
  }
}

TEST(Conformal, CoverageOnGaussianClasses) {
  double total = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::mt19937_64 rng(100 + trial);
    const auto cal_data = fixture::gaussian_three_class(rng, 500);
    const auto test_data = fixture::gaussian_three_class(rng, 1000);
    std::vector<MulticlassSample> samples;
    for (const auto& s : cal_data) samples.push_back({s.p, s.label});
    const auto cal = calibrate(std::span<const MulticlassSample>(samples), 0.1);
    int covered = 0;
    for (const auto& s : test_data) {
      const auto set = prediction_set(cal, multiclass_candidates(s.p));
      covered += std::find(set.begin(), set.end(), s.label) != set.end();
    }
    total += covered / 1000.0;
  }
  EXPECT_NEAR(total / 5, 0.9, 0.03);
}
