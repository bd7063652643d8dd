#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "shredder/error.hpp"
#include "shredder/metrics.hpp"
#include "shredder/rng.hpp"

namespace shredder {
namespace {

// Pairs of D-dimensional Gaussians with per-coordinate correlation rho.
std::pair<SampleMatrix, SampleMatrix> correlated_gaussians(std::size_t n, std::size_t d, double rho,
                                                           std::uint64_t seed) {
  CounterRng rng(seed);
  SampleMatrix x(n, d), y(n, d);
  const double s = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double a = rng.normal();
      x(i, j) = static_cast<float>(a);
      y(i, j) = static_cast<float>(rho * a + s * rng.normal());
    }
  }
  return {x, y};
}

double gaussian_mi_bits(double rho, std::size_t d) { return -0.5 * d * std::log2(1.0 - rho * rho); }

class GaussianMI : public ::testing::TestWithParam<std::tuple<double, std::size_t>> {};

TEST_P(GaussianMI, MatchesClosedForm) {
  const auto [rho, d] = GetParam();
  const auto [x, y] = correlated_gaussians(3000, d, rho, 17 + d);
  const auto est = estimate_mi(x, y, 3);
  const double truth = gaussian_mi_bits(rho, d);
  EXPECT_NEAR(est.bits, truth, 0.08 + 0.1 * truth) << "rho " << rho << " d " << d;
  EXPECT_EQ(est.n, 3000u);
  EXPECT_EQ(est.k, 3u);
}

INSTANTIATE_TEST_SUITE_P(Correlations, GaussianMI,
                         ::testing::Combine(::testing::Values(0.3, 0.6, 0.9), ::testing::Values(1u, 2u)));

TEST(MutualInformation, IndependentVariablesGiveNearZero) {
  const auto [x, y] = correlated_gaussians(3000, 2, 0.0, 5);
  const auto est = estimate_mi(x, y);
  EXPECT_NEAR(est.raw_bits, 0.0, 0.05);
  EXPECT_GE(est.bits, 0.0);
}

TEST(MutualInformation, IdenticalVariablesAreHighlyInformative) {
  const auto [x, unused] = correlated_gaussians(1000, 1, 0.0, 6);
  EXPECT_GE(estimate_mi(x, x).bits, 5.0);
}

TEST(MutualInformation, IsSymmetric) {
  const auto [x, y] = correlated_gaussians(800, 3, 0.5, 7);
  EXPECT_NEAR(estimate_mi(x, y).bits, estimate_mi(y, x).bits, 1e-9);
}

TEST(MutualInformation, InvariantToJointRowPermutation) {
  const auto [x, y] = correlated_gaussians(600, 2, 0.7, 8);
  SampleMatrix px(x.rows(), x.cols()), py(y.rows(), y.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t j = (i * 37 + 11) % x.rows();
    for (std::size_t c = 0; c < x.cols(); ++c) {
      px(j, c) = x(i, c);
      py(j, c) = y(i, c);
    }
  }
  EXPECT_NEAR(estimate_mi(px, py).bits, estimate_mi(x, y).bits, 1e-9);
}

TEST(MutualInformation, RejectsBadInputs) {
  const auto [x, y] = correlated_gaussians(10, 1, 0.5, 9);
  EXPECT_THROW(estimate_mi(x, SampleMatrix(9, 1)), ShapeError);
  EXPECT_THROW(estimate_mi(x, y, 0), ConfigError);
  EXPECT_THROW(estimate_mi(x, y, 10), NumericError);
  SampleMatrix bad = x;
  bad(0, 0) = std::nanf("");
  EXPECT_THROW(estimate_mi(bad, y), NumericError);
}

TEST(Entropy, UniformUnitIntervalIsZeroBits) {
  CounterRng rng(10);
  SampleMatrix x(5000, 1);
  for (std::size_t i = 0; i < x.rows(); ++i) x(i, 0) = static_cast<float>(rng.uniform());
  EXPECT_NEAR(estimate_entropy(x), 0.0, 0.05);
}

TEST(Entropy, UnitLaplaceIsLog2TwoE) {
  CounterRng rng(11);
  SampleMatrix x(5000, 1);
  for (std::size_t i = 0; i < x.rows(); ++i) x(i, 0) = static_cast<float>(rng.laplace(0.0, 1.0));
  EXPECT_NEAR(estimate_entropy(x), std::log2(2.0 * std::numbers::e), 0.05);
}

TEST(Snr, WorkedExamples) {
  const SampleMatrix a(2, 2, {1.f, -1.f, 2.f, 0.f});  // mean square 1.5
  EXPECT_DOUBLE_EQ(snr(a, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(snr(a, laplace_variance(1.0)), 0.75);
  const std::vector<Tensor> rows{Tensor({2}, {1.f, -1.f}), Tensor({2}, {2.f, 0.f})};
  EXPECT_DOUBLE_EQ(snr(rows, 0.5), 3.0);
  EXPECT_THROW(snr(a, 0.0), NumericError);
}

TEST(Snr, FallsAsNoiseScaleGrows) {
  const SampleMatrix a(1, 3, {1.f, 2.f, 3.f});
  double previous = snr(a, laplace_variance(0.1));
  for (double b = 0.2; b < 5.0; b += 0.3) {
    const double current = snr(a, laplace_variance(b));
    EXPECT_LT(current, previous);
    previous = current;
  }
}

TEST(Surrogate, WorkedExamples) {
  EXPECT_DOUBLE_EQ(surrogate_objective(1.0, 1.0, 0.0, 5.0), std::log(2.0));
  EXPECT_DOUBLE_EQ(surrogate_objective(3.0, 1.0, 0.5, 2.0), std::log(4.0) + 1.0);
  EXPECT_THROW(surrogate_objective(0.0, 1.0, 0.0, 0.0), NumericError);
}

TEST(Surrogate, DecreasesAsNoiseScaleGrows) {
  double previous = surrogate_objective(2.0, 0.1, 0.0, 0.0);
  for (double b = 0.2; b < 10.0; b *= 1.5) {
    const double current = surrogate_objective(2.0, b, 0.0, 0.0);
    EXPECT_LT(current, previous);
    previous = current;
  }
}

}  // namespace
}  // namespace shredder
