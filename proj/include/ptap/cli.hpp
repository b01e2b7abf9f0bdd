#pragma once

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ptap/assignment.hpp"
#include "ptap/calibration.hpp"
#include "ptap/config.hpp"
#include "ptap/io.hpp"
#include "ptap/netgen.hpp"
#include "ptap/network.hpp"

#ifndef PTAP_VERSION
#define PTAP_VERSION "0.0.0"
#endif

namespace ptap::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kPartial = 1, kInvalidInput = 2, kUnreachable = 3, kFitDiverged = 4 };

/// Flags shared by every command; each one overrides the config files.
struct CommonOptions {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool strict = false;
  std::optional<std::string> family;
  std::optional<int> max_iters;
  std::optional<double> gap_tol;
  std::optional<double> flow_scale;
  std::optional<int> threads;
};

inline RunConfig resolve(const CommonOptions& o, RunConfig cfg = {}) {
  for (const auto& c : o.configs) load_config(cfg, c);
  if (o.seed) cfg.solver.seed = *o.seed;
  if (o.strict) cfg.strict = true;
  if (o.family) cfg.pvdf.family = parse_family(*o.family);
  if (o.max_iters) cfg.solver.max_iterations = *o.max_iters;
  if (o.gap_tol) cfg.solver.gap_tolerance = *o.gap_tol;
  if (o.flow_scale) cfg.network.flow_scale = *o.flow_scale;
  if (o.threads) cfg.solver.threads = *o.threads;
  validate(cfg);
  return cfg;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::InvalidInput, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

/// Collects what a command read and wrote, then emits manifest.json.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& cfg)
      : command_(std::move(command)), cfg_(cfg), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& p) { inputs_.push_back({p.string(), sha256_hex(io::read_text(p))}); }
  void output(const fs::path& dir, const std::string& name, const std::string& text) {
    io::write_text(dir / name, text);
    outputs_.push_back(name);
  }

  void write(const fs::path& dir) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["versions"] = {{"ptap", PTAP_VERSION}, {"compiler", __VERSION__}};
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& [p, digest] : inputs_) j["inputs"].push_back({{"path", p}, {"sha256", digest}});
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::string section;
    for (const auto& line : split_lines(to_ini(cfg_))) {
      if (line.empty()) continue;
      if (line.front() == '[') {
        section = line.substr(1, line.size() - 2);
        config[section] = nlohmann::ordered_json::object();
      } else {
        const auto eq = line.find(" = ");
        config[section][line.substr(0, eq)] = line.substr(eq + 3);
      }
    }
    j["config"] = config;
    j["seed"] = cfg_.solver.seed;
    j["outputs"] = outputs_;
    j["duration_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_text(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  static std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }
  std::string command_;
  RunConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> outputs_;
};

inline fs::path prepare_out(const std::string& out) {
  if (out.empty()) fail(ErrorCode::InvalidInput, "--out is required");
  fs::create_directories(out);
  return out;
}

/// Maps library errors onto the exit-code contract.
template <class F>
int guarded(std::ostream& diag, F&& f) {
  try {
    return f();
  } catch (const UnreachableError& e) {
    diag << "error: " << e.what() << "\n";
    return kUnreachable;
  } catch (const Error& e) {
    diag << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::FitDiverged ? kFitDiverged : kInvalidInput;
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
}

// ---- generate

inline int cmd_generate(const std::string& geometry, const CommonOptions& o, std::ostream& diag) {
  return guarded(diag, [&] {
    const RunConfig cfg = resolve(o);
    auto lines = io::read_centerlines(geometry);
    std::vector<DroppedFeature> dropped;
    lines = simplify(lines, &dropped);
    GenResult gen = build_footpath_graph(lines, cfg.netgen);
    gen.report.dropped.insert(gen.report.dropped.begin(), dropped.begin(), dropped.end());

    const fs::path out = prepare_out(o.out);
    Manifest m("generate", cfg);
    m.input(geometry);
    m.output(out, "nodes.csv", io::nodes_csv(gen.network));
    m.output(out, "links.csv", io::links_csv(gen.network));
    m.output(out, "links.geojson", io::links_geojson(gen));
    m.output(out, "gen_report.txt", io::gen_report_text(gen.report));
    m.write(out);
    for (const auto& d : gen.report.dropped) diag << "dropped: " << d.feature << ": " << d.reason << "\n";
    for (const auto& [c, n] : gen.report.incomplete_blocks)
      diag << "warning: block centroid " << c << " has " << n << " connectors\n";
    return !gen.report.dropped.empty() && cfg.strict ? kPartial : kOk;
  });
}

// ---- assign

struct AssignOutputs {
  Network network;
  DemandTable demand;
  AssignmentResult result;
};

inline void write_assignment(Manifest& m, const fs::path& out, const RunConfig& cfg, const AssignOutputs& a) {
  m.output(out, "link_results.csv", io::link_results_csv(a.network, a.result));
  m.output(out, "paths.csv", io::paths_csv(a.result));
  m.output(out, "summary.txt", io::summary_text(summarize(a.result, a.demand), to_string(cfg.pvdf.family)));
  m.output(out, "gap_history.csv", io::gap_history_csv(a.result));
  m.output(out, "config.ini", to_ini(cfg));
  // Parsed inputs, so a scenario run can start from this directory alone.
  fs::create_directories(out / "inputs");
  m.output(out, "inputs/nodes.csv", io::nodes_csv(a.network));
  m.output(out, "inputs/links.csv", io::links_csv(a.network));
  m.output(out, "inputs/demand.csv", io::demand_csv(a.demand));
}

inline AssignOutputs run_assignment(Network net, DemandTable demand, const RunConfig& cfg) {
  AssignmentResult r = solve(net, demand, cfg.pvdf, cfg.solver);
  return {std::move(net), std::move(demand), std::move(r)};
}

inline int cmd_assign(const std::string& nodes, const std::string& links, const std::string& demand_file,
                      const CommonOptions& o, std::ostream& diag) {
  return guarded(diag, [&] {
    const RunConfig cfg = resolve(o);
    DemandTable demand = io::read_demand(demand_file, cfg.period_s);
    Network net = build_network(io::read_nodes(nodes), io::read_links(links), demand, cfg.network);
    const fs::path out = prepare_out(o.out);
    Manifest m("assign", cfg);
    m.input(nodes);
    m.input(links);
    m.input(demand_file);
    const auto a = run_assignment(std::move(net), std::move(demand), cfg);
    write_assignment(m, out, cfg, a);
    m.write(out);
    if (!a.result.converged)
      diag << "warning: not converged after " << a.result.iterations << " iterations (gap "
           << io::fmt(a.result.gap_history.back()) << ")\n";
    return kOk;
  });
}

// ---- scenario

struct ScenarioSpec {
  std::vector<LinkId> closed_links;
  struct Override {
    NodeId origin = 0, destination = 0;
    std::optional<double> multiplier, demand;
  };
  std::vector<Override> demand_overrides;
};

inline ScenarioSpec parse_scenario(const std::string& text) {
  ScenarioSpec s;
  nlohmann::json j;
  try {
    j = text.find_first_not_of(" \t\r\n") == std::string::npos ? nlohmann::json::object() : nlohmann::json::parse(text);
    for (const auto& id : j.value("closed_links", nlohmann::json::array())) s.closed_links.push_back(id.get<LinkId>());
    for (const auto& ov : j.value("demand_overrides", nlohmann::json::array())) {
      ScenarioSpec::Override o;
      o.origin = ov.at("origin").get<NodeId>();
      o.destination = ov.at("destination").get<NodeId>();
      if (ov.contains("multiplier")) o.multiplier = ov["multiplier"].get<double>();
      if (ov.contains("demand")) o.demand = ov["demand"].get<double>();
      if (o.multiplier.has_value() == o.demand.has_value())
        fail(ErrorCode::InvalidInput, "each demand override needs exactly one of multiplier or demand");
      s.demand_overrides.push_back(o);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("scenario spec: ") + e.what());
  }
  return s;
}

inline DemandTable apply_overrides(DemandTable d, const ScenarioSpec& s) {
  for (const auto& ov : s.demand_overrides) {
    auto it = std::find_if(d.entries.begin(), d.entries.end(),
                           [&](const OdDemand& e) { return e.origin == ov.origin && e.destination == ov.destination; });
    if (it == d.entries.end()) {
      if (ov.multiplier)
        fail(ErrorCode::InvalidInput, "no base demand for OD (" + std::to_string(ov.origin) + ", " +
                                          std::to_string(ov.destination) + ")");
      d.entries.push_back({ov.origin, ov.destination, *ov.demand});
    } else {
      it->demand = ov.multiplier ? it->demand * *ov.multiplier : *ov.demand;
    }
  }
  std::erase_if(d.entries, [](const OdDemand& e) { return e.demand == 0.0; });
  return d;
}

inline int cmd_scenario(const std::string& base, const std::string& spec_file, const CommonOptions& o,
                        std::ostream& diag) {
  return guarded(diag, [&] {
    const fs::path b(base);
    RunConfig cfg;
    load_config(cfg, b / "config.ini");
    cfg = resolve(o, cfg);
    const ScenarioSpec spec = parse_scenario(io::read_text(spec_file));
    const DemandTable base_demand = io::read_demand(b / "inputs" / "demand.csv", cfg.period_s);
    const Network base_net =
        build_network(io::read_nodes(b / "inputs" / "nodes.csv"), io::read_links(b / "inputs" / "links.csv"),
                      base_demand, cfg.network);
    const auto base_volumes = io::read_link_volumes(b / "link_results.csv");

    std::vector<std::string> warnings;
    Network net = close_links(base_net, spec.closed_links, &warnings);
    for (const auto& w : warnings) diag << "warning: " << w << "\n";
    DemandTable demand = apply_overrides(base_demand, spec);
    validate_demand(base_net, demand);  // ids must exist before closure; nodes cut off by it become unreachable

    const fs::path out = prepare_out(o.out);
    Manifest m("scenario", cfg);
    m.input(b / "config.ini");
    m.input(b / "inputs" / "nodes.csv");
    m.input(b / "inputs" / "links.csv");
    m.input(b / "inputs" / "demand.csv");
    m.input(b / "link_results.csv");
    m.input(spec_file);
    const auto a = run_assignment(std::move(net), std::move(demand), cfg);

    std::string delta = "link_id,volume_base,volume_scenario,delta\n";
    for (const Link& l : base_net.links()) {
      const auto it = base_volumes.find(l.id);
      const double vb = it == base_volumes.end() ? 0.0 : it->second;
      const double vs = a.network.has_link(l.id) ? a.result.link_volumes[a.network.link_index(l.id)] : 0.0;
      delta += std::to_string(l.id) + "," + io::fmt(vb) + "," + io::fmt(vs) + "," + io::fmt(vs - vb) + "\n";
    }
    write_assignment(m, out, cfg, a);
    m.output(out, "link_delta.csv", delta);
    m.write(out);
    return kOk;
  });
}

// ---- calibrate

inline int cmd_calibrate(const std::string& observations, const CommonOptions& o, std::ostream& diag) {
  return guarded(diag, [&]() -> int {
    const RunConfig cfg = resolve(o);
    const auto obs = io::read_observations(observations);
    const fs::path out = prepare_out(o.out);
    Manifest m("calibrate", cfg);
    m.input(observations);

    std::string text, rows(io::kFitReportHeader);
    auto flush = [&] {
      m.output(out, "fit_report.txt", text);
      m.output(out, "fit_report.csv", rows);
    };
    auto record = [&](const std::string& name, const FitReport& r) {
      text += io::fit_report_text(name, r) + "\n";
      rows += io::fit_report_row(name, r);
    };
    int status = kOk;
    PvdfConfig fitted = cfg.pvdf;
    try {
      const auto law = fit_speed_law(obs);
      const double kc = critical_density(law.law);
      const double c = capacity(law.law);
      record("speed_law", law.report);
      text += "[derived]\ncritical_density_ped_m2 = " + io::fmt(kc) + "\ncapacity_ped_per_m_hr = " + io::fmt(c) + "\n\n";
      const auto flows = to_quasi_density(obs, law.law);
      const auto sym = fit_pvdf(flows, CalibrationFamily::symmetric, cfg.calibration.tau, c);
      record("pvdf_symmetric", sym.report);
      fitted.symmetric = sym.symmetric;
      const auto asym = fit_pvdf(flows, CalibrationFamily::asymmetric, cfg.calibration.tau, c);
      record("pvdf_asymmetric", asym.report);
      fitted.asymmetric = asym.asymmetric;
      try {
        const auto sig = fit_sigma(flows, cfg.calibration.tau, c, cfg.calibration.bins,
                                   static_cast<std::size_t>(cfg.calibration.min_points));
        record("pvdf_sigma", sig.report);
        fitted.sigma = sig.params;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientData) throw;
        diag << "warning: sigma fit skipped, defaults kept: " << e.what() << "\n";
        status = kPartial;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::FitDiverged) {
        flush();
        m.write(out);
      }
      throw;
    }
    flush();
    m.output(out, "parameters.ini", pvdf_ini(fitted));
    m.write(out);
    return status;
  });
}

// ---- report

inline constexpr const char* kSummaryKeys[] = {"family",      "tstt_s",     "average_link_volume_ped",
                                               "path_count",  "average_path_volume_ped", "average_trip_time_s",
                                               "empty_links", "iterations", "final_gap",
                                               "converged"};

inline int cmd_report(const std::vector<std::string>& runs, const CommonOptions& o, std::ostream& out,
                      std::ostream& diag) {
  return guarded(diag, [&] {
    if (runs.empty()) fail(ErrorCode::InvalidInput, "report needs at least one run directory");
    const RunConfig cfg = resolve(o);
    std::optional<Manifest> m;
    if (!o.out.empty()) m.emplace("report", cfg);
    std::string csv = "run";
    for (const char* k : kSummaryKeys) csv += std::string(",") + k;
    csv += "\n";
    for (const auto& run : runs) {
      const fs::path summary = fs::path(run) / "summary.txt";
      const auto kv = io::parse_key_values(io::read_text(summary));
      if (m) m->input(summary);
      csv += fs::path(run).filename().string();
      for (const char* k : kSummaryKeys) {
        auto it = kv.find(k);
        if (it == kv.end()) fail(ErrorCode::ParseError, summary.string() + ": missing " + k);
        csv += "," + it->second;
      }
      csv += "\n";
    }
    if (m) {
      const fs::path dir = prepare_out(o.out);
      m->output(dir, "report.csv", csv);
      m->write(dir);
    } else {
      out << csv;
    }
    return kOk;
  });
}

// ---- entry point

inline void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.configs, "INI config file; later files override earlier ones");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--strict", o.strict, "treat dropped features as failure");
  cmd->add_option("--family", o.family, "pVDF family")
      ->check(CLI::IsMember({"det_symmetric", "det_asymmetric", "stoch_symmetric", "stoch_asymmetric"}));
  cmd->add_option("--max-iters", o.max_iters, "iteration limit");
  cmd->add_option("--gap-tol", o.gap_tol, "relative gap tolerance");
  cmd->add_option("--flow-scale", o.flow_scale, "volume to flow multiplier");
  cmd->add_option("--threads", o.threads, "shortest-path worker threads");
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& diag = std::cerr) {
  CLI::App app{"Pedestrian traffic assignment with bidirectional link costs", "ptap"};
  app.set_version_flag("--version", PTAP_VERSION);
  app.require_subcommand(1);
  CommonOptions o;
  std::string geometry, nodes, links, demand, base, spec, observations;
  std::vector<std::string> runs;

  auto* gen = app.add_subcommand("generate", "build a footpath network from road centerlines");
  gen->add_option("--geometry", geometry, "GeoJSON or id,wkt_linestring,road_class CSV")->required();
  add_common(gen, o);
  auto* asg = app.add_subcommand("assign", "solve the user-equilibrium assignment");
  asg->add_option("--nodes", nodes)->required();
  asg->add_option("--links", links)->required();
  asg->add_option("--demand", demand)->required();
  add_common(asg, o);
  auto* scn = app.add_subcommand("scenario", "re-solve a previous assign run with closures or demand changes");
  scn->add_option("--base", base, "output directory of an assign run")->required();
  scn->add_option("--spec", spec, "scenario JSON")->required();
  add_common(scn, o);
  auto* cal = app.add_subcommand("calibrate", "fit speed law, pVDF and sigma parameters");
  cal->add_option("--observations", observations)->required();
  add_common(cal, o);
  auto* rep = app.add_subcommand("report", "tabulate run summaries");
  rep->add_option("runs", runs, "run directories")->required();
  add_common(rep, o);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << PTAP_VERSION << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    diag << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  if (gen->parsed()) return cmd_generate(geometry, o, diag);
  if (asg->parsed()) return cmd_assign(nodes, links, demand, o, diag);
  if (scn->parsed()) return cmd_scenario(base, spec, o, diag);
  if (cal->parsed()) return cmd_calibrate(observations, o, diag);
  return cmd_report(runs, o, out, diag);
}

}  // namespace ptap::cli
