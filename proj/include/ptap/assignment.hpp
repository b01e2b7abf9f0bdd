#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "ptap/error.hpp"
#include "ptap/network.hpp"
#include "ptap/pvdf.hpp"
#include "ptap/shortest_path.hpp"

namespace ptap {

enum class SolverMode { deterministic, stochastic };

struct SolverConfig {
  int max_iterations = 1000;
  double gap_tolerance = 1e-4;
  /// Unset: stochastic for stochastic pVDF families, deterministic otherwise.
  std::optional<SolverMode> mode;
  int samples_per_iteration = 1;
  std::uint64_t seed = 0;
  /// Worker threads for the per-destination shortest-path searches.
  int threads = 1;
  /// Optional starting path flows; must cover each OD's demand exactly.
  std::vector<Path> warm_start;
};

inline SolverMode resolved_mode(const SolverConfig& s, const PvdfConfig& p) {
  return s.mode.value_or(is_stochastic(p.family) ? SolverMode::stochastic : SolverMode::deterministic);
}

struct AssignmentResult {
  std::vector<double> link_volumes;  // ped per period
  FlowVector link_flows;             // ped/m/hr
  std::vector<double> link_times;    // expected seconds
  std::vector<Path> paths;           // every path generated, with final flow
  std::vector<double> path_costs;    // expected cost of each path at the final flows
  std::vector<double> gap_history;
  double tstt = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Per-link travel times for the given flows. Deterministic mode returns the
/// expected pVDF value; stochastic mode draws one unit normal per stream and
/// samples both directions from it.
inline CostView link_costs(const Network& net, std::span<const double> flows, const PvdfConfig& cfg,
                           SolverMode mode = SolverMode::deterministic, std::mt19937_64* rng = nullptr) {
  if (flows.size() != net.link_count()) fail(ErrorCode::InvalidFlow, "flow vector does not match link count");
  for (double x : flows)
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::InvalidFlow, "flows must be finite and non-negative");
  CostView view;
  view.times.resize(net.link_count());
  const auto& links = net.links();
  if (mode == SolverMode::deterministic) {
    for (std::size_t i = 0; i < links.size(); ++i)
      view.times[i] = expected_time(flows[i], flows[net.mirror_index(i)], links[i].free_flow_time,
                                    links[i].capacity, cfg);
  } else {
    if (!rng) fail(ErrorCode::InvalidInput, "stochastic link costs need a random stream");
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < links.size(); ++i) {
      const std::size_t m = net.mirror_index(i);
      if (m < i) continue;
      const Link& a = links[i];
      const Link& b = links[m];
      const LogNormalSpec sa{expected_time(flows[i], flows[m], a.free_flow_time, a.capacity, cfg),
                             sigma(flows[i], flows[m], a.free_flow_time, a.capacity, cfg.sigma)};
      const LogNormalSpec sb{expected_time(flows[m], flows[i], b.free_flow_time, b.capacity, cfg),
                             sigma(flows[m], flows[i], b.free_flow_time, b.capacity, cfg.sigma)};
      const double z = normal(*rng);
      std::tie(view.times[i], view.times[m]) = stream_correlated_sample(sa, sb, z);
    }
  }
  for (double t : view.times)
    if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorCode::InvalidFlow, "pVDF produced a non-positive link cost");
  return view;
}

namespace detail {

struct OdRoutes {
  std::vector<std::vector<std::size_t>> paths;  // one per OD entry; empty if unreachable
  std::vector<double> costs;                    // shortest cost per OD entry
  std::vector<bool> reachable;
};

/// OD entries grouped by destination node, destinations in ascending id order.
struct DestinationGroups {
  std::vector<std::size_t> dest_node;
  std::vector<std::vector<std::size_t>> entries;
};

inline DestinationGroups group_by_destination(const Network& net, const DemandTable& demand) {
  std::map<NodeId, std::vector<std::size_t>> by_dest;
  for (std::size_t e = 0; e < demand.entries.size(); ++e) by_dest[demand.entries[e].destination].push_back(e);
  DestinationGroups g;
  for (auto& [d, list] : by_dest) {
    g.dest_node.push_back(net.node_index(d));
    g.entries.push_back(std::move(list));
  }
  return g;
}

inline OdRoutes route_all(const Network& net, std::span<const double> costs, const DemandTable& demand,
                          const DestinationGroups& groups, int threads) {
  OdRoutes r;
  const std::size_t n = demand.entries.size();
  r.paths.assign(n, {});
  r.costs.assign(n, kUnreachable);
  r.reachable.assign(n, false);
  auto work = [&](std::size_t g) {
    const auto dist = distances_to(net, costs, groups.dest_node[g]);
    for (std::size_t e : groups.entries[g]) {
      const auto o = net.node_index(demand.entries[e].origin);
      auto p = trace_path(net, costs, dist, o, groups.dest_node[g]);
      if (!p) continue;
      r.paths[e] = std::move(*p);
      r.costs[e] = dist[o];
      r.reachable[e] = true;
    }
  };
  const std::size_t groups_n = groups.dest_node.size();
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), groups_n);
  if (workers <= 1) {
    for (std::size_t g = 0; g < groups_n; ++g) work(g);
  } else {
    // Each destination writes disjoint OD slots, so the outcome does not
    // depend on scheduling.
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t g = w; g < groups_n; g += workers) work(g);
      });
  }
  return r;
}

inline void check_demand(const Network& net, const DemandTable& demand) {
  if (!(demand.period_s > 0.0)) fail(ErrorCode::NonPositivePeriod, "analysis period must be positive");
  std::vector<UnreachableError::OdPair> missing;
  std::map<std::pair<NodeId, NodeId>, int> seen;
  for (const auto& e : demand.entries) {
    if (!(e.demand > 0.0) || !std::isfinite(e.demand))
      fail(ErrorCode::NonPositiveAttribute, "OD demand must be positive");
    if (e.origin == e.destination) fail(ErrorCode::InvalidInput, "OD origin equals destination");
    if (seen[{e.origin, e.destination}]++)
      fail(ErrorCode::DuplicateOD, "(" + std::to_string(e.origin) + ", " + std::to_string(e.destination) + ")");
    if (!net.has_node(e.origin) || !net.has_node(e.destination)) missing.emplace_back(e.origin, e.destination);
  }
  if (!missing.empty()) throw UnreachableError(missing);
}

inline void throw_unreachable(const DemandTable& demand, const OdRoutes& r) {
  std::vector<UnreachableError::OdPair> bad;
  for (std::size_t e = 0; e < demand.entries.size(); ++e)
    if (!r.reachable[e]) bad.emplace_back(demand.entries[e].origin, demand.entries[e].destination);
  if (!bad.empty()) throw UnreachableError(bad);
}

}  // namespace detail

/// Loads every OD's demand on its shortest path under fixed costs.
/// Returns per-link volumes in pedestrians per period.
inline std::vector<double> all_or_nothing(const Network& net, const CostView& costs, const DemandTable& demand) {
  check_costs(net, costs);
  detail::check_demand(net, demand);
  const auto groups = detail::group_by_destination(net, demand);
  const auto routes = detail::route_all(net, costs.times, demand, groups, 1);
  detail::throw_unreachable(demand, routes);
  std::vector<double> volumes(net.link_count(), 0.0);
  for (std::size_t e = 0; e < demand.entries.size(); ++e)
    for (auto a : routes.paths[e]) volumes[a] += demand.entries[e].demand;
  return volumes;
}

/// (TSTT - sum_rs q_rs * shortest_rs) / TSTT under the given expected costs.
inline double relative_gap(const Network& net, std::span<const double> volumes, const DemandTable& demand,
                           const CostView& expected_costs) {
  check_costs(net, expected_costs);
  if (volumes.size() != net.link_count()) fail(ErrorCode::LengthMismatch, "volume vector does not match link count");
  detail::check_demand(net, demand);
  double tstt = 0.0;
  for (std::size_t i = 0; i < volumes.size(); ++i) tstt += volumes[i] * expected_costs.times[i];
  if (!(tstt > 0.0)) fail(ErrorCode::ZeroTSTT, "total system travel time is zero");
  const auto groups = detail::group_by_destination(net, demand);
  const auto routes = detail::route_all(net, expected_costs.times, demand, groups, 1);
  detail::throw_unreachable(demand, routes);
  double sptt = 0.0;
  for (std::size_t e = 0; e < demand.entries.size(); ++e) sptt += demand.entries[e].demand * routes.costs[e];
  return (tstt - sptt) / tstt;
}

inline double total_system_travel_time(const AssignmentResult& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.link_volumes.size(); ++i) s += r.link_volumes[i] * r.link_times[i];
  return s;
}

/// Method of successive averages with step 1/k. Every iteration routes each
/// OD on the current costs (sampled in stochastic mode), blends the loading
/// into the path flows, and measures the relative gap under expected costs.
inline AssignmentResult solve(const Network& net, const DemandTable& demand, const PvdfConfig& pvdf,
                              const SolverConfig& solver = {}) {
  if (solver.max_iterations < 1) fail(ErrorCode::InvalidInput, "max_iterations must be >= 1");
  if (!(solver.gap_tolerance > 0.0)) fail(ErrorCode::InvalidInput, "gap_tolerance must be positive");
  if (solver.samples_per_iteration < 1) fail(ErrorCode::InvalidInput, "samples_per_iteration must be >= 1");
  validate(pvdf);
  detail::check_demand(net, demand);

  const SolverMode mode = resolved_mode(solver, pvdf);
  const auto& entries = demand.entries;
  const std::size_t n_links = net.link_count();
  const auto groups = detail::group_by_destination(net, demand);
  std::mt19937_64 rng(solver.seed);

  // Path store per OD entry: link sequence -> slot.
  std::vector<std::map<std::vector<std::size_t>, std::size_t>> path_index(entries.size());
  std::vector<std::vector<std::vector<std::size_t>>> path_links(entries.size());
  std::vector<std::vector<double>> path_flow(entries.size());
  auto add_flow = [&](std::size_t e, const std::vector<std::size_t>& links, double f) {
    auto [it, inserted] = path_index[e].try_emplace(links, path_links[e].size());
    if (inserted) {
      path_links[e].push_back(links);
      path_flow[e].push_back(0.0);
    }
    path_flow[e][it->second] += f;
  };

  std::vector<double> volumes(n_links, 0.0);
  auto rebuild_volumes = [&] {
    std::fill(volumes.begin(), volumes.end(), 0.0);
    for (std::size_t e = 0; e < entries.size(); ++e)
      for (std::size_t p = 0; p < path_links[e].size(); ++p)
        for (auto a : path_links[e][p]) volumes[a] += path_flow[e][p];
  };
  auto flows_of = [&] { return volumes_to_flows(volumes, net, demand.period_s); };

  // Loads the routing of `costs` with weight `w` of each OD's demand.
  auto load = [&](const std::vector<double>& costs, double w) {
    const auto routes = detail::route_all(net, costs, demand, groups, solver.threads);
    detail::throw_unreachable(demand, routes);
    for (std::size_t e = 0; e < entries.size(); ++e) add_flow(e, routes.paths[e], w * entries[e].demand);
  };
  auto routing_load = [&](double weight) {
    if (mode == SolverMode::deterministic) {
      load(link_costs(net, flows_of(), pvdf).times, weight);
    } else {
      const auto current = flows_of();
      const double w = weight / solver.samples_per_iteration;
      for (int s = 0; s < solver.samples_per_iteration; ++s)
        load(link_costs(net, current, pvdf, SolverMode::stochastic, &rng).times, w);
    }
  };

  if (!solver.warm_start.empty()) {
    std::map<std::pair<NodeId, NodeId>, std::size_t> od_entry;
    for (std::size_t e = 0; e < entries.size(); ++e) od_entry[{entries[e].origin, entries[e].destination}] = e;
    std::vector<double> covered(entries.size(), 0.0);
    for (const Path& p : solver.warm_start) {
      auto it = od_entry.find({p.origin, p.destination});
      if (it == od_entry.end()) fail(ErrorCode::InvalidInput, "warm-start path for an OD without demand");
      if (!(p.flow >= 0.0) || p.links.empty()) fail(ErrorCode::InvalidInput, "warm-start path is invalid");
      std::vector<std::size_t> idx;
      std::size_t at = net.node_index(p.origin);
      for (LinkId id : p.links) {
        const auto a = net.link_index(id);
        if (net.from_index(a) != at) fail(ErrorCode::InvalidInput, "warm-start path is not a connected walk");
        at = net.to_index(a);
        idx.push_back(a);
      }
      if (at != net.node_index(p.destination)) fail(ErrorCode::InvalidInput, "warm-start path ends elsewhere");
      add_flow(it->second, idx, p.flow);
      covered[it->second] += p.flow;
    }
    for (std::size_t e = 0; e < entries.size(); ++e)
      if (std::abs(covered[e] - entries[e].demand) > 1e-9 * std::max(1.0, entries[e].demand))
        fail(ErrorCode::InvalidInput, "warm-start flows do not match OD demand");
  } else {
    routing_load(1.0);
  }
  rebuild_volumes();

  AssignmentResult result;
  int k = 1;
  const bool any_demand = !entries.empty();
  while (true) {
    const CostView expected = link_costs(net, flows_of(), pvdf);
    double gap = 0.0;
    if (any_demand) {
      double tstt = 0.0;
      for (std::size_t i = 0; i < n_links; ++i) tstt += volumes[i] * expected.times[i];
      const auto routes = detail::route_all(net, expected.times, demand, groups, solver.threads);
      detail::throw_unreachable(demand, routes);
      double sptt = 0.0;
      for (std::size_t e = 0; e < entries.size(); ++e) sptt += entries[e].demand * routes.costs[e];
      gap = std::max(0.0, (tstt - sptt) / tstt);
      result.gap_history.push_back(gap);
      if (gap <= solver.gap_tolerance) {
        result.converged = true;
        break;
      }
      if (k >= solver.max_iterations) break;
      ++k;
      const double step = 1.0 / k;
      for (auto& flows : path_flow)
        for (auto& f : flows) f *= (1.0 - step);
      if (mode == SolverMode::deterministic) {
        for (std::size_t e = 0; e < entries.size(); ++e) add_flow(e, routes.paths[e], step * entries[e].demand);
      } else {
        routing_load(step);
      }
      rebuild_volumes();
    } else {
      result.gap_history.push_back(0.0);
      result.converged = true;
      break;
    }
  }

  result.iterations = k;
  result.link_volumes = volumes;
  result.link_flows = flows_of();
  const CostView final_costs = link_costs(net, result.link_flows, pvdf);
  result.link_times = final_costs.times;
  for (std::size_t e = 0; e < entries.size(); ++e)
    for (std::size_t p = 0; p < path_links[e].size(); ++p) {
      Path path;
      path.origin = entries[e].origin;
      path.destination = entries[e].destination;
      path.flow = path_flow[e][p];
      double cost = 0.0;
      for (auto a : path_links[e][p]) {
        path.links.push_back(net.links()[a].id);
        cost += final_costs.times[a];
      }
      result.paths.push_back(std::move(path));
      result.path_costs.push_back(cost);
    }
  result.tstt = total_system_travel_time(result);
  return result;
}

/// Network performance measures reported per run.
struct RunSummary {
  double tstt = 0.0;
  double average_link_volume = 0.0;  // over links carrying flow
  std::size_t path_count = 0;
  double average_path_volume = 0.0;
  double average_trip_time = 0.0;
  std::size_t empty_links = 0;
  int iterations = 0;
  double final_gap = 0.0;
  bool converged = false;
};

inline RunSummary summarize(const AssignmentResult& r, const DemandTable& demand) {
  RunSummary s;
  s.tstt = r.tstt;
  double loaded = 0.0;
  std::size_t used = 0;
  for (double v : r.link_volumes) {
    if (v > 1e-9) {
      loaded += v;
      ++used;
    } else {
      ++s.empty_links;
    }
  }
  s.average_link_volume = used ? loaded / used : 0.0;
  s.path_count = r.paths.size();
  double pf = 0.0;
  for (const auto& p : r.paths) pf += p.flow;
  s.average_path_volume = s.path_count ? pf / s.path_count : 0.0;
  const double trips = demand.total();
  s.average_trip_time = trips > 0.0 ? r.tstt / trips : 0.0;
  s.iterations = r.iterations;
  s.final_gap = r.gap_history.empty() ? 0.0 : r.gap_history.back();
  s.converged = r.converged;
  return s;
}

}  // namespace ptap
