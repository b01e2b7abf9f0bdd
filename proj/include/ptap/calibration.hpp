#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptap/error.hpp"
#include "ptap/least_squares.hpp"
#include "ptap/pvdf.hpp"

namespace ptap {

/// One aggregated measurement. Flows, when present, are observed ped/m/hr in
/// the reference and counter directions.
struct Observation {
  double density = 0.0;      // ped/m^2
  double speed = 0.0;        // m/s
  double travel_time = 0.0;  // s
  std::optional<double> ref_flow;
  std::optional<double> counter_flow;
};

/// Travel time against directional flows already expressed as quasi-density.
struct FlowObservation {
  double ref_flow = 0.0;
  double counter_flow = 0.0;
  double travel_time = 0.0;
  double total() const { return ref_flow + counter_flow; }
};

/// u(k) = u_f * exp(-(k / theta)^gamma)
struct SpeedLaw {
  double free_speed = 1.55;
  double theta = 1.0;
  double gamma = 1.0;
  double speed(double density) const { return free_speed * std::exp(-std::pow(density / theta, gamma)); }
};

struct Goodness {
  double root_sse = 0.0;  // sqrt(sum of squared residuals)
  double rmse_mean = 0.0;   // sqrt(mean squared residual)
  double r_squared = 0.0;   // 1 - SSE / SST
};

struct FitReport {
  std::vector<std::pair<std::string, double>> params;
  Goodness fit;
  double initial_root_sse = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline Goodness goodness(std::span<const double> predictions, std::span<const double> observations) {
  if (predictions.size() != observations.size())
    fail(ErrorCode::LengthMismatch, "predictions and observations differ in length");
  if (observations.size() < 2) fail(ErrorCode::InsufficientData, "goodness of fit needs at least two points");
  const double n = static_cast<double>(observations.size());
  const double mean = std::accumulate(observations.begin(), observations.end(), 0.0) / n;
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const double e = predictions[i] - observations[i];
    sse += e * e;
    sst += (observations[i] - mean) * (observations[i] - mean);
  }
  Goodness g;
  g.root_sse = std::sqrt(sse);
  g.rmse_mean = std::sqrt(sse / n);
  // Constant observations: perfect predictions score 1, anything else 0.
  g.r_squared = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
  return g;
}

/// k_c = theta / gamma^(1/gamma), the density maximizing u(k) * k.
inline double critical_density(const SpeedLaw& law) { return law.theta / std::pow(law.gamma, 1.0 / law.gamma); }

/// Capacity in ped/m/hr: u_f * exp(-1/gamma) * k_c * 3600.
inline double capacity(const SpeedLaw& law) {
  return law.free_speed * std::exp(-1.0 / law.gamma) * critical_density(law) * 3600.0;
}

inline double quasi_density(double density, double capacity_ped_m_hr, double critical) {
  if (!(critical > 0.0)) fail(ErrorCode::InvalidInput, "critical density must be positive");
  return capacity_ped_m_hr * density / critical;
}

namespace detail {

inline void require_finite(const LeastSquaresResult& r, const char* what) {
  if (!r.finite) fail(ErrorCode::FitDiverged, std::string(what) + " fit produced non-finite values");
}

inline double rmse_of(double cost) { return std::sqrt(2.0 * cost); }

}  // namespace detail

struct SpeedLawFit {
  SpeedLaw law;
  FitReport report;
};

/// Least-squares fit of the speed-density law, solved in log-parameters so
/// u_f, theta and gamma stay positive. Starts from u_f = fastest observed
/// speed, theta = mean density, gamma = 1.
inline SpeedLawFit fit_speed_law(std::span<const Observation> obs, const LeastSquaresOptions& opt = {}) {
  std::vector<double> densities;
  for (const auto& o : obs) {
    if (!(o.density >= 0.0) || !(o.speed >= 0.0)) fail(ErrorCode::InvalidInput, "density and speed must be >= 0");
    densities.push_back(o.density);
  }
  std::sort(densities.begin(), densities.end());
  const auto distinct = std::unique(densities.begin(), densities.end()) - densities.begin();
  if (distinct < 4) fail(ErrorCode::InsufficientData, "speed law needs at least 4 distinct densities");

  double vmax = 0.0, kmean = 0.0;
  for (const auto& o : obs) {
    vmax = std::max(vmax, o.speed);
    kmean += o.density;
  }
  kmean /= static_cast<double>(obs.size());
  if (!(vmax > 0.0) || !(kmean > 0.0)) fail(ErrorCode::InsufficientData, "speeds and densities are all zero");

  const ResidualFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    const SpeedLaw law{std::exp(p[0]), std::exp(p[1]), std::exp(p[2])};
    for (std::size_t i = 0; i < obs.size(); ++i) r[i] = law.speed(obs[i].density) - obs[i].speed;
  };
  Eigen::VectorXd p0(3);
  p0 << std::log(vmax), std::log(kmean), 0.0;
  const auto res = levenberg_marquardt(f, p0, static_cast<Eigen::Index>(obs.size()), opt);
  detail::require_finite(res, "speed law");

  SpeedLawFit out;
  out.law = {std::exp(res.params[0]), std::exp(res.params[1]), std::exp(res.params[2])};
  std::vector<double> pred, meas;
  for (const auto& o : obs) {
    pred.push_back(out.law.speed(o.density));
    meas.push_back(o.speed);
  }
  out.report.params = {{"free_speed", out.law.free_speed}, {"theta", out.law.theta}, {"gamma", out.law.gamma}};
  out.report.fit = goodness(pred, meas);
  out.report.initial_root_sse = detail::rmse_of(res.initial_cost);
  out.report.iterations = res.iterations;
  out.report.converged = res.converged;
  return out;
}

/// Maps observations onto quasi-density flows. The total comes from density;
/// when directional flows were measured their ratio splits the total,
/// otherwise the whole total is assigned to the reference direction.
inline std::vector<FlowObservation> to_quasi_density(std::span<const Observation> obs, const SpeedLaw& law) {
  const double c = capacity(law);
  const double kc = critical_density(law);
  std::vector<FlowObservation> out;
  out.reserve(obs.size());
  for (const auto& o : obs) {
    if (!(o.travel_time > 0.0)) fail(ErrorCode::InvalidInput, "travel times must be positive");
    const double total = quasi_density(o.density, c, kc);
    double ratio = 1.0;
    if (o.ref_flow && o.counter_flow) {
      const double sum = *o.ref_flow + *o.counter_flow;
      if (*o.ref_flow < 0.0 || *o.counter_flow < 0.0) fail(ErrorCode::InvalidInput, "negative observed flow");
      ratio = sum > 0.0 ? *o.ref_flow / sum : 0.5;
    }
    out.push_back({total * ratio, total * (1.0 - ratio), o.travel_time});
  }
  return out;
}

enum class CalibrationFamily { symmetric, asymmetric };

struct PvdfFit {
  SymmetricParams symmetric;
  AsymmetricParams asymmetric;
  FitReport report;
};

inline SymmetricParams symmetric_initial_guess() { return {1.0, 2.0}; }
inline AsymmetricParams asymmetric_initial_guess() { return {}; }

/// Fits the deterministic pVDF of the chosen family by minimizing squared
/// travel-time residuals. Flows must already be quasi-density.
inline PvdfFit fit_pvdf(std::span<const FlowObservation> obs, CalibrationFamily family, double tau,
                        double capacity_ped_m_hr, const LeastSquaresOptions& opt = {}) {
  if (!(tau > 0.0) || !(capacity_ped_m_hr > 0.0)) fail(ErrorCode::InvalidInput, "tau and capacity must be positive");
  const std::size_t n_params = family == CalibrationFamily::symmetric ? 2 : 7;
  if (obs.size() < n_params + 1) fail(ErrorCode::InsufficientData, "not enough observations for pVDF fit");
  for (const auto& o : obs)
    if (!(o.ref_flow >= 0.0) || !(o.counter_flow >= 0.0) || !(o.travel_time > 0.0))
      fail(ErrorCode::InvalidInput, "pVDF observations need non-negative flows and positive times");

  const double c = capacity_ped_m_hr;
  auto sym_of = [](const Eigen::VectorXd& p) { return SymmetricParams{p[0], p[1]}; };
  auto asym_of = [](const Eigen::VectorXd& p) { return AsymmetricParams{p[0], p[1], p[2], p[3], p[4], p[5], p[6]}; };
  // Raw forms: the search may pass through parameter values the validated
  // evaluators would reject.
  auto predict = [&](const Eigen::VectorXd& p, const FlowObservation& o) {
    const double base = std::pow(o.total() / c, p[1]);
    if (family == CalibrationFamily::symmetric) return tau * (1.0 + p[0] * base);
    const double dr = o.ref_flow / c - p[5];
    const double dc = o.counter_flow / c - p[6];
    return tau * (1.0 + p[0] * base) + tau * p[2] * std::exp(p[3] * dr * dr + p[4] * dc * dc);
  };
  const ResidualFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (std::size_t i = 0; i < obs.size(); ++i) r[i] = predict(p, obs[i]) - obs[i].travel_time;
  };

  Eigen::VectorXd p0(n_params);
  if (family == CalibrationFamily::symmetric) {
    const auto g = symmetric_initial_guess();
    p0 << g.alpha, g.beta;
  } else {
    const auto g = asymmetric_initial_guess();
    p0 << g.alpha, g.beta, g.mu, g.eta_r, g.eta_c, g.lambda_r, g.lambda_c;
  }
  const auto res = levenberg_marquardt(f, p0, static_cast<Eigen::Index>(obs.size()), opt);
  detail::require_finite(res, "pVDF");

  PvdfFit out;
  std::vector<double> pred, meas;
  for (const auto& o : obs) {
    pred.push_back(predict(res.params, o));
    meas.push_back(o.travel_time);
  }
  if (family == CalibrationFamily::symmetric) {
    out.symmetric = sym_of(res.params);
    out.report.params = {{"alpha", out.symmetric.alpha}, {"beta", out.symmetric.beta}};
  } else {
    out.asymmetric = asym_of(res.params);
    const auto& a = out.asymmetric;
    out.report.params = {{"alpha", a.alpha},   {"beta", a.beta},         {"mu", a.mu},
                         {"eta_r", a.eta_r},   {"eta_c", a.eta_c},       {"lambda_r", a.lambda_r},
                         {"lambda_c", a.lambda_c}};
  }
  out.report.fit = goodness(pred, meas);
  out.report.initial_root_sse = detail::rmse_of(res.initial_cost);
  out.report.iterations = res.iterations;
  out.report.converged = res.converged;
  return out;
}

struct FlowBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_total_flow = 0.0;
  double std_time = 0.0;  // population standard deviation of travel time
};

/// Equal-width bins over total flow. Bins with fewer than min_points
/// observations are kept in the output but flagged by their count.
inline std::vector<FlowBin> bin_by_total_flow(std::span<const FlowObservation> obs, int bins) {
  if (bins < 1) fail(ErrorCode::InvalidInput, "bin count must be positive");
  if (obs.empty()) fail(ErrorCode::InsufficientData, "no observations to bin");
  double lo = obs[0].total(), hi = obs[0].total();
  for (const auto& o : obs) lo = std::min(lo, o.total()), hi = std::max(hi, o.total());
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  std::vector<FlowBin> out(static_cast<std::size_t>(bins));
  std::vector<double> sum_t(out.size(), 0.0), sum_t2(out.size(), 0.0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].lower = lo + width * static_cast<double>(b);
    out[b].upper = lo + width * static_cast<double>(b + 1);
  }
  for (const auto& o : obs) {
    auto b = static_cast<std::size_t>((o.total() - lo) / width);
    b = std::min(b, out.size() - 1);
    out[b].count += 1;
    out[b].mean_total_flow += o.total();
    sum_t[b] += o.travel_time;
    sum_t2[b] += o.travel_time * o.travel_time;
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (out[b].count == 0) continue;
    const double n = static_cast<double>(out[b].count);
    out[b].mean_total_flow /= n;
    const double mean = sum_t[b] / n;
    out[b].std_time = std::sqrt(std::max(0.0, sum_t2[b] / n - mean * mean));
  }
  return out;
}

struct SigmaFit {
  SigmaParams params;
  FitReport report;
  std::vector<FlowBin> bins;
  double bin_width = 0.0;
};

/// Bins observations by total flow, takes the travel-time spread per bin and
/// fits phi, gamma, lambda_t of the sigma form to the bin means.
inline SigmaFit fit_sigma(std::span<const FlowObservation> obs, double tau, double capacity_ped_m_hr, int bins = 20,
                          std::size_t min_points = 3, const LeastSquaresOptions& opt = {}) {
  if (!(tau > 0.0) || !(capacity_ped_m_hr > 0.0)) fail(ErrorCode::InvalidInput, "tau and capacity must be positive");
  SigmaFit out;
  out.bins = bin_by_total_flow(obs, bins);
  out.bin_width = out.bins.front().upper - out.bins.front().lower;
  std::vector<const FlowBin*> used;
  for (const auto& b : out.bins)
    if (b.count >= min_points) used.push_back(&b);
  if (used.size() < 4) fail(ErrorCode::InsufficientData, "sigma fit needs at least 4 bins with enough points");

  const double c = capacity_ped_m_hr;
  auto predict = [&](const Eigen::VectorXd& p, double total) {
    const double d = total / c - p[2];
    return tau * p[0] * std::exp(-p[1] * d * d);
  };
  const ResidualFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (std::size_t i = 0; i < used.size(); ++i) r[i] = predict(p, used[i]->mean_total_flow) - used[i]->std_time;
  };
  const FlowBin* peak = *std::max_element(used.begin(), used.end(),
                                          [](const FlowBin* a, const FlowBin* b) { return a->std_time < b->std_time; });
  Eigen::VectorXd p0(3);
  p0 << std::max(peak->std_time / tau, 1e-6), 1.0, peak->mean_total_flow / c;
  const auto res = levenberg_marquardt(f, p0, static_cast<Eigen::Index>(used.size()), opt);
  detail::require_finite(res, "sigma");

  out.params = {res.params[0], res.params[1], res.params[2]};
  std::vector<double> pred, meas;
  for (const FlowBin* b : used) {
    pred.push_back(predict(res.params, b->mean_total_flow));
    meas.push_back(b->std_time);
  }
  out.report.params = {{"phi", out.params.phi}, {"gamma", out.params.gamma}, {"lambda_t", out.params.lambda_t}};
  out.report.fit = goodness(pred, meas);
  out.report.initial_root_sse = detail::rmse_of(res.initial_cost);
  out.report.iterations = res.iterations;
  out.report.converged = res.converged;
  return out;
}

}  // namespace ptap
