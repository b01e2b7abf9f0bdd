#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "ptap/error.hpp"
#include "ptap/network.hpp"

namespace ptap {

/// Link travel times in seconds, indexed by link position.
struct CostView {
  std::vector<double> times;
};

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Cost-to-destination labels from a backward Dijkstra search. Centroids
/// other than the destination are labelled but never expanded, so no path
/// passes through them.
inline std::vector<double> distances_to(const Network& net, std::span<const double> costs, std::size_t dest) {
  std::vector<double> dist(net.node_count(), kUnreachable);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist[dest] = 0.0;
  heap.emplace(0.0, dest);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    if (v != dest && net.centroid(v)) continue;
    for (std::size_t a : net.in_links(v)) {
      const std::size_t u = net.from_index(a);
      const double nd = d + costs[a];
      if (nd < dist[u]) {
        dist[u] = nd;
        heap.emplace(nd, u);
      }
    }
  }
  return dist;
}

/// Walks forward from the origin choosing, at each node, the lowest-id link
/// that stays on a shortest path. The result is the lexicographically
/// smallest link-id sequence among the (near-)tied shortest paths.
inline std::optional<std::vector<std::size_t>> trace_path(const Network& net, std::span<const double> costs,
                                                          std::span<const double> dist, std::size_t origin,
                                                          std::size_t dest) {
  if (dist[origin] == kUnreachable) return std::nullopt;
  std::vector<std::size_t> path;
  std::size_t u = origin;
  while (u != dest) {
    const double target = dist[u] * (1.0 + 1e-12);
    std::size_t chosen = static_cast<std::size_t>(-1);
    for (std::size_t a : net.out_links(u)) {
      const std::size_t v = net.to_index(a);
      if (v != dest && net.centroid(v)) continue;
      if (dist[v] == kUnreachable) continue;
      if (costs[a] + dist[v] <= target) {
        chosen = a;
        break;
      }
    }
    if (chosen == static_cast<std::size_t>(-1))
      fail(ErrorCode::InvalidInput, "shortest-path labels are inconsistent with link costs");
    path.push_back(chosen);
    u = net.to_index(chosen);
    if (path.size() > net.link_count())
      fail(ErrorCode::InvalidInput, "shortest-path trace did not terminate");
  }
  return path;
}

inline void check_costs(const Network& net, const CostView& costs) {
  if (costs.times.size() != net.link_count()) fail(ErrorCode::LengthMismatch, "cost vector does not match link count");
  for (double c : costs.times)
    if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::InvalidInput, "link costs must be positive and finite");
}

/// Minimal-cost simple path; ties go to the smallest link-id sequence.
inline Path shortest_path(const Network& net, const CostView& costs, NodeId origin, NodeId destination) {
  if (origin == destination) fail(ErrorCode::InvalidInput, "origin equals destination");
  check_costs(net, costs);
  if (!net.has_node(origin) || !net.has_node(destination))
    throw UnreachableError({{origin, destination}});
  const auto o = net.node_index(origin);
  const auto d = net.node_index(destination);
  const auto dist = distances_to(net, costs.times, d);
  auto idx = trace_path(net, costs.times, dist, o, d);
  if (!idx) throw UnreachableError({{origin, destination}});
  Path p;
  p.origin = origin;
  p.destination = destination;
  for (auto a : *idx) p.links.push_back(net.links()[a].id);
  return p;
}

inline double path_cost(const Network& net, const CostView& costs, const Path& p) {
  double c = 0.0;
  for (LinkId id : p.links) c += costs.times[net.link_index(id)];
  return c;
}

}  // namespace ptap
