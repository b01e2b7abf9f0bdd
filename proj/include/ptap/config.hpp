#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <sstream>
#include <string>

#include "ptap/assignment.hpp"
#include "ptap/error.hpp"
#include "ptap/io.hpp"
#include "ptap/netgen.hpp"
#include "ptap/pvdf.hpp"

namespace ptap {

struct CalibrationConfig {
  double tau = 0.685;  // s, free-flow time of the observed segment
  int bins = 20;
  int min_points = 3;
};

/// Every tunable of a run, one INI section per module.
struct RunConfig {
  double period_s = 3600.0;
  NetworkOptions network;
  PvdfConfig pvdf;
  SolverConfig solver;
  GenConfig netgen;
  CalibrationConfig calibration;
  bool strict = false;
};

namespace config_detail {

namespace pt = boost::property_tree;

template <class T>
void read(const pt::ptree& tree, const std::string& key, T& value) {
  const auto v = tree.get_optional<std::string>(key);
  if (!v) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (*v == "true" || *v == "1") value = true;
      else if (*v == "false" || *v == "0") value = false;
      else throw std::invalid_argument(*v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      value = *v;
    } else {
      std::istringstream in(*v);
      T parsed{};
      if (!(in >> parsed) || !(in >> std::ws).eof()) throw std::invalid_argument(*v);
      value = parsed;
    }
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, "config key " + key + ": bad value '" + *v + "'");
  }
}

}  // namespace config_detail

/// Applies keys found in INI text on top of `cfg`. Unknown sections and keys
/// are rejected so typos do not pass silently.
inline void apply_ini(RunConfig& cfg, const std::string& text, const std::string& source = "<config>") {
  namespace pt = boost::property_tree;
  using config_detail::read;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::ParseError, source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  static const std::map<std::string, std::vector<std::string>> known{
      {"network", {"period_s", "flow_scale"}},
      {"pvdf", {"family"}},
      {"pvdf_symmetric", {"alpha", "beta"}},
      {"pvdf_asymmetric", {"alpha", "beta", "mu", "eta_r", "eta_c", "lambda_r", "lambda_c"}},
      {"pvdf_sigma", {"phi", "gamma", "lambda_t"}},
      {"solver", {"max_iterations", "gap_tolerance", "seed", "threads", "samples_per_iteration", "mode"}},
      {"netgen",
       {"offset_distance", "footpath_width", "default_capacity", "default_speed", "crossing_speed",
        "midblock_min_length"}},
      {"calibration", {"tau", "bins", "min_points"}},
      {"output", {"strict"}},
  };
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) fail(ErrorCode::ParseError, source + ": unknown section [" + section + "]");
    for (const auto& [key, _] : body)
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        fail(ErrorCode::ParseError, source + ": unknown key " + section + "." + key);
  }

  read(tree, "network.period_s", cfg.period_s);
  read(tree, "network.flow_scale", cfg.network.flow_scale);
  std::string family(to_string(cfg.pvdf.family));
  read(tree, "pvdf.family", family);
  cfg.pvdf.family = parse_family(family);
  auto& s = cfg.pvdf.symmetric;
  read(tree, "pvdf_symmetric.alpha", s.alpha);
  read(tree, "pvdf_symmetric.beta", s.beta);
  auto& a = cfg.pvdf.asymmetric;
  read(tree, "pvdf_asymmetric.alpha", a.alpha);
  read(tree, "pvdf_asymmetric.beta", a.beta);
  read(tree, "pvdf_asymmetric.mu", a.mu);
  read(tree, "pvdf_asymmetric.eta_r", a.eta_r);
  read(tree, "pvdf_asymmetric.eta_c", a.eta_c);
  read(tree, "pvdf_asymmetric.lambda_r", a.lambda_r);
  read(tree, "pvdf_asymmetric.lambda_c", a.lambda_c);
  read(tree, "pvdf_sigma.phi", cfg.pvdf.sigma.phi);
  read(tree, "pvdf_sigma.gamma", cfg.pvdf.sigma.gamma);
  read(tree, "pvdf_sigma.lambda_t", cfg.pvdf.sigma.lambda_t);
  read(tree, "solver.max_iterations", cfg.solver.max_iterations);
  read(tree, "solver.gap_tolerance", cfg.solver.gap_tolerance);
  read(tree, "solver.seed", cfg.solver.seed);
  read(tree, "solver.threads", cfg.solver.threads);
  read(tree, "solver.samples_per_iteration", cfg.solver.samples_per_iteration);
  std::string mode = cfg.solver.mode ? (*cfg.solver.mode == SolverMode::stochastic ? "stochastic" : "deterministic") : "auto";
  read(tree, "solver.mode", mode);
  if (mode == "auto") cfg.solver.mode.reset();
  else if (mode == "stochastic") cfg.solver.mode = SolverMode::stochastic;
  else if (mode == "deterministic") cfg.solver.mode = SolverMode::deterministic;
  else fail(ErrorCode::ParseError, source + ": solver.mode must be auto, deterministic or stochastic");
  auto& g = cfg.netgen;
  read(tree, "netgen.offset_distance", g.offset_distance);
  read(tree, "netgen.footpath_width", g.footpath_width);
  read(tree, "netgen.default_capacity", g.default_capacity);
  read(tree, "netgen.default_speed", g.default_speed);
  read(tree, "netgen.crossing_speed", g.crossing_speed);
  read(tree, "netgen.midblock_min_length", g.midblock_min_length);
  read(tree, "calibration.tau", cfg.calibration.tau);
  read(tree, "calibration.bins", cfg.calibration.bins);
  read(tree, "calibration.min_points", cfg.calibration.min_points);
  read(tree, "output.strict", cfg.strict);
}

inline void load_config(RunConfig& cfg, const std::filesystem::path& path) {
  apply_ini(cfg, io::read_text(path), path.string());
}

inline void validate(const RunConfig& cfg) {
  if (!(cfg.period_s > 0.0)) fail(ErrorCode::NonPositivePeriod, "network.period_s must be positive");
  if (!(cfg.network.flow_scale > 0.0)) fail(ErrorCode::InvalidInput, "network.flow_scale must be positive");
  validate(cfg.pvdf);
  if (cfg.solver.max_iterations < 1) fail(ErrorCode::InvalidInput, "solver.max_iterations must be >= 1");
  if (!(cfg.solver.gap_tolerance > 0.0)) fail(ErrorCode::InvalidInput, "solver.gap_tolerance must be positive");
  if (cfg.solver.threads < 1) fail(ErrorCode::InvalidInput, "solver.threads must be >= 1");
  if (cfg.solver.samples_per_iteration < 1) fail(ErrorCode::InvalidInput, "solver.samples_per_iteration must be >= 1");
  cfg.netgen.validate();
  if (!(cfg.calibration.tau > 0.0)) fail(ErrorCode::InvalidInput, "calibration.tau must be positive");
  if (cfg.calibration.bins < 1 || cfg.calibration.min_points < 1)
    fail(ErrorCode::InvalidInput, "calibration.bins and calibration.min_points must be >= 1");
}

/// PVDF parameter sections only; the calibrate command writes this form.
inline std::string pvdf_ini(const PvdfConfig& p) {
  using io::fmt;
  std::ostringstream o;
  o << "[pvdf_symmetric]\nalpha = " << fmt(p.symmetric.alpha) << "\nbeta = " << fmt(p.symmetric.beta) << "\n\n";
  const auto& a = p.asymmetric;
  o << "[pvdf_asymmetric]\nalpha = " << fmt(a.alpha) << "\nbeta = " << fmt(a.beta) << "\nmu = " << fmt(a.mu)
    << "\neta_r = " << fmt(a.eta_r) << "\neta_c = " << fmt(a.eta_c) << "\nlambda_r = " << fmt(a.lambda_r)
    << "\nlambda_c = " << fmt(a.lambda_c) << "\n\n";
  o << "[pvdf_sigma]\nphi = " << fmt(p.sigma.phi) << "\ngamma = " << fmt(p.sigma.gamma)
    << "\nlambda_t = " << fmt(p.sigma.lambda_t) << "\n";
  return o.str();
}

/// Fully resolved configuration; loading it back reproduces `cfg`.
inline std::string to_ini(const RunConfig& cfg) {
  using io::fmt;
  std::ostringstream o;
  o << "[network]\nperiod_s = " << fmt(cfg.period_s) << "\nflow_scale = " << fmt(cfg.network.flow_scale) << "\n\n";
  o << "[pvdf]\nfamily = " << to_string(cfg.pvdf.family) << "\n\n";
  o << pvdf_ini(cfg.pvdf) << "\n";
  const auto& s = cfg.solver;
  o << "[solver]\nmax_iterations = " << s.max_iterations << "\ngap_tolerance = " << fmt(s.gap_tolerance)
    << "\nseed = " << s.seed << "\nthreads = " << s.threads << "\nsamples_per_iteration = " << s.samples_per_iteration
    << "\nmode = " << (s.mode ? (*s.mode == SolverMode::stochastic ? "stochastic" : "deterministic") : "auto")
    << "\n\n";
  const auto& g = cfg.netgen;
  o << "[netgen]\noffset_distance = " << fmt(g.offset_distance) << "\nfootpath_width = " << fmt(g.footpath_width)
    << "\ndefault_capacity = " << fmt(g.default_capacity) << "\ndefault_speed = " << fmt(g.default_speed)
    << "\ncrossing_speed = " << fmt(g.crossing_speed) << "\nmidblock_min_length = " << fmt(g.midblock_min_length)
    << "\n\n";
  o << "[calibration]\ntau = " << fmt(cfg.calibration.tau) << "\nbins = " << cfg.calibration.bins
    << "\nmin_points = " << cfg.calibration.min_points << "\n\n";
  o << "[output]\nstrict = " << (cfg.strict ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace ptap
