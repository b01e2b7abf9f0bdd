#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ptap/calibration.hpp"

using namespace ptap;

namespace {

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

std::vector<Observation> speed_data(const SpeedLaw& law) {
  std::vector<Observation> out;
  for (int i = 0; i <= 40; ++i) {
    const double k = 0.1 * i;
    out.push_back({k, law.speed(k), 10.0, std::nullopt, std::nullopt});
  }
  return out;
}

constexpr double kTau = 0.685;
constexpr double kCap = 4847.0;

std::vector<FlowObservation> symmetric_data(double alpha, double beta) {
  std::vector<FlowObservation> out;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 5; ++j) {
      const double x = 400.0 * i, xc = 300.0 * j;
      out.push_back({x, xc, kTau * (1.0 + alpha * std::pow((x + xc) / kCap, beta))});
    }
  return out;
}

// Bin centers with two-point spreads: each bin holds exactly mean +- sigma,
// so the population std equals sigma at the bin's total flow.
std::vector<FlowObservation> sigma_data(const SigmaParams& p, int bins) {
  std::vector<FlowObservation> out;
  const double hi = 2.5 * kCap;
  for (int b = 0; b < bins; ++b) {
    const double x = hi * (b + 0.5) / bins;
    const double d = x / kCap - p.lambda_t;
    const double s = kTau * p.phi * std::exp(-p.gamma * d * d);
    for (int r = 0; r < 4; ++r) out.push_back({x * 0.6, x * 0.4, 5.0 + (r % 2 ? s : -s)});
  }
  return out;
}

}  // namespace

TEST(SpeedLaw, RoundTrip) {
  const SpeedLaw truth{1.55, 2.0, 1.5};
  const auto obs = speed_data(truth);
  const auto fit = fit_speed_law(obs);
  EXPECT_LT(rel(fit.law.free_speed, 1.55), 1e-6);
  EXPECT_LT(rel(fit.law.theta, 2.0), 1e-6);
  EXPECT_LT(rel(fit.law.gamma, 1.5), 1e-6);
  EXPECT_LE(fit.report.fit.root_sse, fit.report.initial_root_sse);
  EXPECT_DOUBLE_EQ(fit.law.speed(0.0), fit.law.free_speed);
  for (double k = 0.05; k < 10.0; k += 0.05) EXPECT_LT(fit.law.speed(k + 0.05), fit.law.speed(k));
}

TEST(SpeedLaw, NeedsFourDistinctDensities) {
  std::vector<Observation> obs{{0.1, 1.5, 1}, {0.1, 1.4, 1}, {0.2, 1.3, 1}, {0.3, 1.2, 1}, {0.3, 1.2, 1}};
  try {
    fit_speed_law(obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(CriticalDensity, Examples) {
  EXPECT_DOUBLE_EQ(critical_density({1.5, 2.0, 1.0}), 2.0);
  EXPECT_NEAR(critical_density({1.5, 2.0, 2.0}), 1.41421356, 1e-8);
}

TEST(CriticalDensity, MaximizesFlowOnGrid) {
  for (const SpeedLaw law : {SpeedLaw{1.55, 2.0, 1.5}, SpeedLaw{1.3, 1.2, 0.7}, SpeedLaw{1.0, 3.0, 2.5}}) {
    const double kc = critical_density(law);
    const double best = law.speed(kc) * kc;
    for (int i = 1; i <= 20000; ++i) {
      const double k = kc * 4.0 * i / 20000.0;
      EXPECT_LE(law.speed(k) * k, best * (1.0 + 1e-12));
    }
  }
}

TEST(Capacity, Identities) {
  for (const SpeedLaw law : {SpeedLaw{1.55, 2.0, 1.5}, SpeedLaw{1.3, 1.2, 0.7}, SpeedLaw{1.5, 2.0, 2.0}}) {
    const double kc = critical_density(law);
    EXPECT_LT(rel(capacity(law), law.speed(kc) * kc * 3600.0), 1e-12);
    SpeedLaw twice = law;
    twice.free_speed *= 2.0;
    EXPECT_LT(rel(capacity(twice), 2.0 * capacity(law)), 1e-12);
  }
  const double hand = 1.5 * std::exp(-0.5) * (2.0 / std::sqrt(2.0)) * 3600.0;
  EXPECT_NEAR(capacity({1.5, 2.0, 2.0}), hand, 1e-9);
  EXPECT_NEAR(capacity({1.5, 2.0, 2.0}), 4632.0, 0.5);
}

TEST(QuasiDensity, Linear) {
  EXPECT_EQ(quasi_density(0.0, 4000.0, 1.3), 0.0);
  EXPECT_DOUBLE_EQ(quasi_density(1.3, 4000.0, 1.3), 4000.0);
  EXPECT_DOUBLE_EQ(quasi_density(2.6, 4000.0, 1.3), 8000.0);
  EXPECT_THROW(quasi_density(1.0, 4000.0, 0.0), Error);
}

TEST(FitPvdf, SymmetricRoundTrip) {
  const auto obs = symmetric_data(0.949, 2.031);
  const auto fit = fit_pvdf(obs, CalibrationFamily::symmetric, kTau, kCap);
  EXPECT_LT(rel(fit.symmetric.alpha, 0.949), 1e-4);
  EXPECT_LT(rel(fit.symmetric.beta, 2.031), 1e-4);
  EXPECT_NEAR(fit.report.fit.r_squared, 1.0, 1e-12);
  EXPECT_LE(fit.report.fit.root_sse, fit.report.initial_root_sse);
}

TEST(FitPvdf, AsymmetricRoundTrip) {
  const AsymmetricParams truth{1.5, 1.1, -0.7, -5.0, -6.0, 0.45, 0.35};
  std::vector<FlowObservation> obs;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) {
      const double x = 250.0 * i, xc = 250.0 * j;
      obs.push_back({x, xc, eval_det_asymmetric(x, xc, kTau, kCap, truth)});
    }
  const auto fit = fit_pvdf(obs, CalibrationFamily::asymmetric, kTau, kCap);
  EXPECT_LT(rel(fit.asymmetric.alpha, truth.alpha), 1e-4);
  EXPECT_LT(rel(fit.asymmetric.beta, truth.beta), 1e-4);
  EXPECT_LT(rel(fit.asymmetric.mu, truth.mu), 1e-4);
  EXPECT_LT(rel(fit.asymmetric.lambda_r, truth.lambda_r), 1e-4);
  EXPECT_LT(rel(fit.asymmetric.lambda_c, truth.lambda_c), 1e-4);
  EXPECT_GT(fit.report.fit.r_squared, 1.0 - 1e-10);
}

TEST(FitPvdf, ConstantTravelTime) {
  std::vector<FlowObservation> obs;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3000.0);
  for (int i = 0; i < 40; ++i) obs.push_back({u(rng), u(rng), kTau});
  const auto fit = fit_pvdf(obs, CalibrationFamily::symmetric, kTau, kCap);
  double worst = 0.0;
  for (const auto& o : obs)
    worst = std::max(worst, std::abs(fit.symmetric.alpha * std::pow(o.total() / kCap, fit.symmetric.beta)));
  EXPECT_LT(worst, 1e-6);
  EXPECT_LE(fit.report.fit.rmse_mean, 1e-6);
}

TEST(FitPvdf, InsufficientData) {
  const auto obs = symmetric_data(1, 2);
  const std::vector<FlowObservation> two(obs.begin(), obs.begin() + 2);
  EXPECT_THROW(fit_pvdf(two, CalibrationFamily::symmetric, kTau, kCap), Error);
  const std::vector<FlowObservation> seven(obs.begin(), obs.begin() + 7);
  try {
    fit_pvdf(seven, CalibrationFamily::asymmetric, kTau, kCap);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(FitPvdf, QuasiDensityConsistency) {
  const SpeedLaw law{1.55, 2.0, 1.5};
  const double c = capacity(law);
  const double kc = critical_density(law);
  std::vector<Observation> obs;
  for (int i = 0; i <= 30; ++i) {
    const double k = 0.1 * i;
    const double x = c * k / kc;
    obs.push_back({k, law.speed(k), kTau * (1.0 + 0.949 * std::pow(x / c, 2.031)), std::nullopt, std::nullopt});
  }
  const auto fitted_law = fit_speed_law(obs).law;
  const auto flows = to_quasi_density(obs, fitted_law);
  const auto fit = fit_pvdf(flows, CalibrationFamily::symmetric, kTau, capacity(fitted_law));
  EXPECT_LT(rel(fit.symmetric.alpha, 0.949), 1e-4);
  EXPECT_LT(rel(fit.symmetric.beta, 2.031), 1e-4);
}

TEST(ToQuasiDensity, KeepsDirectionRatio) {
  const SpeedLaw law{1.55, 2.0, 1.5};
  std::vector<Observation> obs{{1.0, 1.0, 9.0, 300.0, 100.0}, {1.0, 1.0, 9.0, std::nullopt, std::nullopt}};
  const auto f = to_quasi_density(obs, law);
  const double total = capacity(law) / critical_density(law);
  EXPECT_NEAR(f[0].total(), total, 1e-9);
  EXPECT_NEAR(f[0].ref_flow / f[0].counter_flow, 3.0, 1e-12);
  EXPECT_NEAR(f[1].ref_flow, total, 1e-9);
  EXPECT_EQ(f[1].counter_flow, 0.0);
}

TEST(FitSigma, RoundTrip) {
  const SigmaParams truth{0.454, 1.439, 1.307};
  const auto obs = sigma_data(truth, 20);
  const auto fit = fit_sigma(obs, kTau, kCap);
  EXPECT_LT(rel(fit.params.phi, truth.phi), 1e-3);
  EXPECT_LT(rel(fit.params.gamma, truth.gamma), 1e-3);
  EXPECT_LT(rel(fit.params.lambda_t, truth.lambda_t), 1e-3);
  EXPECT_LE(fit.report.fit.root_sse, fit.report.initial_root_sse);
}

TEST(FitSigma, PeakWithinOneBinOfEmpiricalMax) {
  const auto obs = sigma_data({0.454, 1.439, 1.307}, 20);
  const auto fit = fit_sigma(obs, kTau, kCap);
  const FlowBin* peak = nullptr;
  for (const auto& b : fit.bins)
    if (b.count >= 3 && (!peak || b.std_time > peak->std_time)) peak = &b;
  ASSERT_NE(peak, nullptr);
  EXPECT_LE(std::abs(fit.params.lambda_t * kCap - peak->mean_total_flow), fit.bin_width);
}

TEST(FitSigma, HomoscedasticGivesFlatGamma) {
  std::vector<FlowObservation> obs;
  for (int b = 0; b < 20; ++b)
    for (int r = 0; r < 4; ++r) obs.push_back({100.0 * b, 0.0, 5.0 + (r % 2 ? 0.2 : -0.2)});
  const auto fit = fit_sigma(obs, kTau, kCap);
  EXPECT_NEAR(fit.params.gamma, 0.0, 1e-4);
  EXPECT_NEAR(fit.report.fit.rmse_mean, 0.0, 1e-8);
}

TEST(FitSigma, TooFewPopulatedBins) {
  std::vector<FlowObservation> obs;
  for (int b = 0; b < 20; ++b) obs.push_back({100.0 * b, 0.0, 5.0});
  try {
    fit_sigma(obs, kTau, kCap);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(Goodness, Examples) {
  const std::vector<double> obs{1, 2, 3};
  const std::vector<double> same{1, 2, 3};
  auto g = goodness(same, obs);
  EXPECT_EQ(g.root_sse, 0.0);
  EXPECT_EQ(g.r_squared, 1.0);
  const std::vector<double> mean{2, 2, 2};
  EXPECT_DOUBLE_EQ(goodness(mean, obs).r_squared, 0.0);
  const std::vector<double> off{1, 2, 4};
  g = goodness(off, obs);
  EXPECT_DOUBLE_EQ(g.root_sse, 1.0);
  EXPECT_DOUBLE_EQ(g.rmse_mean, std::sqrt(1.0 / 3.0));
  EXPECT_DOUBLE_EQ(g.r_squared, 0.5);
  const std::vector<double> shorter{1, 2};
  try {
    goodness(shorter, obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}
