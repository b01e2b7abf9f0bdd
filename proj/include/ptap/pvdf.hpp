#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "ptap/error.hpp"
#include "ptap/network.hpp"

namespace ptap {

/// Pedestrian volume-delay functions. Flows are in ped/m/hr, free-flow times
/// and results in seconds. Defaults are the calibrated values shipped with
/// the library.

struct SymmetricParams {
  double alpha = 0.949;
  double beta = 2.031;
};

struct AsymmetricParams {
  double alpha = 1.658;
  double beta = 0.997;
  double mu = -0.836;
  double eta_r = -5.447;
  double eta_c = -5.737;
  double lambda_r = 0.415;
  double lambda_c = 0.394;
};

/// Travel-time standard deviation. gamma is the decay magnitude of the
/// Gaussian bump around lambda_t; see sigma().
struct SigmaParams {
  double phi = 0.454;
  double gamma = 1.439;
  double lambda_t = 1.307;
};

enum class PvdfFamily { det_symmetric, det_asymmetric, stoch_symmetric, stoch_asymmetric };

inline std::string_view to_string(PvdfFamily f) {
  switch (f) {
    case PvdfFamily::det_symmetric: return "det_symmetric";
    case PvdfFamily::det_asymmetric: return "det_asymmetric";
    case PvdfFamily::stoch_symmetric: return "stoch_symmetric";
    case PvdfFamily::stoch_asymmetric: return "stoch_asymmetric";
  }
  return "?";
}

inline PvdfFamily parse_family(std::string_view s) {
  for (auto f : {PvdfFamily::det_symmetric, PvdfFamily::det_asymmetric, PvdfFamily::stoch_symmetric,
                 PvdfFamily::stoch_asymmetric})
    if (to_string(f) == s) return f;
  fail(ErrorCode::InvalidInput, "unknown pVDF family '" + std::string(s) + "'");
}

inline bool is_stochastic(PvdfFamily f) {
  return f == PvdfFamily::stoch_symmetric || f == PvdfFamily::stoch_asymmetric;
}
inline bool is_symmetric(PvdfFamily f) {
  return f == PvdfFamily::det_symmetric || f == PvdfFamily::stoch_symmetric;
}

struct PvdfConfig {
  PvdfFamily family = PvdfFamily::det_symmetric;
  SymmetricParams symmetric;
  AsymmetricParams asymmetric;
  SigmaParams sigma;
};

namespace detail {

inline void check_inputs(double x, double x_counter, double tau, double capacity) {
  if (!(x >= 0.0) || !(x_counter >= 0.0) || !std::isfinite(x) || !std::isfinite(x_counter))
    fail(ErrorCode::InvalidInput, "flows must be finite and non-negative");
  if (!(tau > 0.0) || !(capacity > 0.0))
    fail(ErrorCode::InvalidInput, "free-flow time and capacity must be positive");
}

}  // namespace detail

inline void validate(const SymmetricParams& p) {
  if (!(p.alpha > 0.0) || !(p.beta > 0.0)) fail(ErrorCode::InvalidInput, "symmetric pVDF needs alpha, beta > 0");
}
inline void validate(const AsymmetricParams& p) {
  if (!(p.alpha > 0.0) || !(p.beta > 0.0)) fail(ErrorCode::InvalidInput, "asymmetric pVDF needs alpha, beta > 0");
  if (!(p.eta_r <= 0.0) || !(p.eta_c <= 0.0))
    fail(ErrorCode::InvalidInput, "asymmetric pVDF needs eta_r, eta_c <= 0");
}
inline void validate(const SigmaParams& p) {
  if (!(p.phi >= 0.0) || !(p.gamma >= 0.0)) fail(ErrorCode::InvalidInput, "sigma needs phi, gamma >= 0");
}
inline void validate(const PvdfConfig& c) {
  if (is_symmetric(c.family)) validate(c.symmetric);
  else validate(c.asymmetric);
  if (is_stochastic(c.family)) validate(c.sigma);
}

/// tau * (1 + alpha * ((x + x') / c)^beta)
inline double eval_det_symmetric(double x, double x_counter, double tau, double capacity,
                                 const SymmetricParams& p = {}) {
  detail::check_inputs(x, x_counter, tau, capacity);
  return tau * (1.0 + p.alpha * std::pow((x + x_counter) / capacity, p.beta));
}

/// n-th partial derivative (n = 1..3) of the symmetric form with respect to x.
inline double det_symmetric_derivative(int order, double x, double x_counter, double tau, double capacity,
                                       const SymmetricParams& p = {}) {
  detail::check_inputs(x, x_counter, tau, capacity);
  const double r = (x + x_counter) / capacity;
  double coeff = tau * p.alpha;
  double power = p.beta;
  for (int k = 0; k < order; ++k) {
    coeff *= power / capacity;
    power -= 1.0;
  }
  if (coeff == 0.0) return 0.0;
  return coeff * std::pow(r, power);
}

struct AsymmetricComponents {
  double symmetric_term = 0.0;
  double bidirectional_term = 0.0;
  double total() const { return symmetric_term + bidirectional_term; }
};

/// Splits the asymmetric pVDF into its BPR-like part and the bidirectional
/// exponential part tau * mu * exp(eta_r (x/c - lambda_r)^2 + eta_c (x'/c - lambda_c)^2).
inline AsymmetricComponents eval_asym_components(double x, double x_counter, double tau, double capacity,
                                                 const AsymmetricParams& p = {}) {
  detail::check_inputs(x, x_counter, tau, capacity);
  const double dr = x / capacity - p.lambda_r;
  const double dc = x_counter / capacity - p.lambda_c;
  return {tau * (1.0 + p.alpha * std::pow((x + x_counter) / capacity, p.beta)),
          tau * p.mu * std::exp(p.eta_r * dr * dr + p.eta_c * dc * dc)};
}

inline double eval_det_asymmetric(double x, double x_counter, double tau, double capacity,
                                  const AsymmetricParams& p = {}) {
  const auto c = eval_asym_components(x, x_counter, tau, capacity, p);
  return c.symmetric_term + c.bidirectional_term;
}

/// tau * phi * exp(-gamma * ((x + x') / c - lambda_t)^2). Peaks at tau * phi.
inline double sigma(double x, double x_counter, double tau, double capacity, const SigmaParams& p = {}) {
  detail::check_inputs(x, x_counter, tau, capacity);
  const double d = (x + x_counter) / capacity - p.lambda_t;
  return tau * p.phi * std::exp(-p.gamma * d * d);
}

/// Expected travel time under the configured family.
inline double expected_time(double x, double x_counter, double tau, double capacity, const PvdfConfig& cfg) {
  return is_symmetric(cfg.family) ? eval_det_symmetric(x, x_counter, tau, capacity, cfg.symmetric)
                                  : eval_det_asymmetric(x, x_counter, tau, capacity, cfg.asymmetric);
}

/// A log-normal travel time described by its mean and standard deviation in
/// seconds. Log-space parameters follow by moment matching.
struct LogNormalSpec {
  double mean_time = 0.0;
  double std_time = 0.0;

  double log_variance() const {
    const double cv = std_time / mean_time;
    return std::log1p(cv * cv);
  }
  double log_sd() const { return std::sqrt(log_variance()); }
  double log_mean() const { return std::log(mean_time) - 0.5 * log_variance(); }

  /// Realization for a unit-normal draw z.
  double quantile_at(double z) const {
    if (std_time == 0.0) return mean_time;
    return std::exp(log_mean() + log_sd() * z);
  }

  double cdf(double t) const {
    if (std_time == 0.0) return t < mean_time ? 0.0 : 1.0;
    if (t <= 0.0) return 0.0;
    return 0.5 * std::erfc(-(std::log(t) - log_mean()) / (log_sd() * std::sqrt(2.0)));
  }
};

inline void validate(const LogNormalSpec& s) {
  if (!(s.mean_time > 0.0) || !(s.std_time >= 0.0) || !std::isfinite(s.mean_time) || !std::isfinite(s.std_time))
    fail(ErrorCode::InvalidInput, "log-normal spec needs mean > 0 and std >= 0");
}

inline LogNormalSpec lognormal_spec(double x, double x_counter, const Link& link, const PvdfConfig& cfg) {
  if (!is_stochastic(cfg.family)) fail(ErrorCode::InvalidInput, "lognormal_spec needs a stochastic family");
  LogNormalSpec s{expected_time(x, x_counter, link.free_flow_time, link.capacity, cfg),
                  sigma(x, x_counter, link.free_flow_time, link.capacity, cfg.sigma)};
  validate(s);
  return s;
}

/// Both links of a stream share one unit-normal draw, which gives the
/// perfect within-stream correlation.
inline std::pair<double, double> stream_correlated_sample(const LogNormalSpec& link_spec,
                                                          const LogNormalSpec& mirror_spec, double unit_normal) {
  validate(link_spec);
  validate(mirror_spec);
  if (!std::isfinite(unit_normal)) fail(ErrorCode::InvalidInput, "unit-normal draw must be finite");
  return {link_spec.quantile_at(unit_normal), mirror_spec.quantile_at(unit_normal)};
}

struct FentonWilkinson {
  LogNormalSpec time;  // mean and standard deviation of the path time
  double log_mean = 0.0;     // M
  double log_variance = 0.0; // D^2
};

/// Moment-matched single log-normal for a sum of independent log-normal link
/// times: mean and variance add, then map back to log space.
inline FentonWilkinson fenton_wilkinson(std::span<const LogNormalSpec> path_specs) {
  if (path_specs.empty()) fail(ErrorCode::EmptyPath, "Fenton-Wilkinson needs at least one link");
  if (path_specs.size() == 1) {
    validate(path_specs[0]);
    return {path_specs[0], path_specs[0].log_mean(), path_specs[0].log_variance()};
  }
  double mean = 0.0;
  double var = 0.0;
  for (const auto& s : path_specs) {
    validate(s);
    mean += s.mean_time;
    var += s.std_time * s.std_time;
  }
  FentonWilkinson fw;
  fw.time = {mean, std::sqrt(var)};
  fw.log_variance = std::log1p(var / (mean * mean));
  fw.log_mean = std::log(mean) - 0.5 * fw.log_variance;
  return fw;
}

}  // namespace ptap
