#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptap/error.hpp"

namespace ptap {

using NodeId = std::int64_t;
using LinkId = std::int64_t;

enum class NodeKind { intersection, midblock, block_centroid, external_centroid, connector };
enum class LinkKind { footpath, crossing, connector };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::intersection: return "intersection";
    case NodeKind::midblock: return "midblock";
    case NodeKind::block_centroid: return "block_centroid";
    case NodeKind::external_centroid: return "external_centroid";
    case NodeKind::connector: return "connector";
  }
  return "?";
}

inline std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::footpath: return "footpath";
    case LinkKind::crossing: return "crossing";
    case LinkKind::connector: return "connector";
  }
  return "?";
}

inline NodeKind parse_node_kind(std::string_view s) {
  for (auto k : {NodeKind::intersection, NodeKind::midblock, NodeKind::block_centroid,
                 NodeKind::external_centroid, NodeKind::connector})
    if (to_string(k) == s) return k;
  fail(ErrorCode::ParseError, "unknown node kind '" + std::string(s) + "'");
}

inline LinkKind parse_link_kind(std::string_view s) {
  for (auto k : {LinkKind::footpath, LinkKind::crossing, LinkKind::connector})
    if (to_string(k) == s) return k;
  fail(ErrorCode::ParseError, "unknown link kind '" + std::string(s) + "'");
}

inline bool is_centroid(NodeKind k) {
  return k == NodeKind::block_centroid || k == NodeKind::external_centroid;
}

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Node {
  NodeId id = 0;
  Point position;
  NodeKind kind = NodeKind::intersection;
};

/// A directed footpath, crossing or connector link. Capacity is per meter of
/// width per hour; free_flow_time is in seconds.
struct Link {
  LinkId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length = 0.0;
  double width = 1.0;
  double capacity = 0.0;
  double free_flow_time = 0.0;
  LinkKind kind = LinkKind::footpath;
  std::optional<LinkId> mirror;  // resolved by build_network when absent
};

struct OdDemand {
  NodeId origin = 0;
  NodeId destination = 0;
  double demand = 0.0;  // pedestrians per analysis period
};

struct DemandTable {
  std::vector<OdDemand> entries;
  double period_s = 3600.0;

  double total() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.demand;
    return s;
  }
};

struct Path {
  std::vector<LinkId> links;
  NodeId origin = 0;
  NodeId destination = 0;
  double flow = 0.0;
};

/// Per-link flow in ped/m/hr, indexed by link position in the network.
using FlowVector = std::vector<double>;

struct NetworkOptions {
  /// Multiplier applied when converting per-period volumes into ped/m/hr.
  double flow_scale = 1.0;
};

/// Immutable footpath graph. Links are stored sorted by id; every link has
/// exactly one mirror on the same bidirectional stream.
class Network {
 public:
  Network() = default;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t link_count() const noexcept { return links_.size(); }
  std::size_t stream_count() const noexcept { return stream_count_; }
  double flow_scale() const noexcept { return options_.flow_scale; }
  const NetworkOptions& options() const noexcept { return options_; }

  bool has_link(LinkId id) const { return link_pos_.count(id) != 0; }
  bool has_node(NodeId id) const { return node_pos_.count(id) != 0; }

  std::size_t link_index(LinkId id) const {
    auto it = link_pos_.find(id);
    if (it == link_pos_.end()) fail(ErrorCode::UnknownLink, "link " + std::to_string(id));
    return it->second;
  }

  std::size_t node_index(NodeId id) const {
    auto it = node_pos_.find(id);
    if (it == node_pos_.end()) fail(ErrorCode::UnknownNode, "node " + std::to_string(id));
    return it->second;
  }

  const Link& link(LinkId id) const { return links_[link_index(id)]; }
  const Node& node(NodeId id) const { return nodes_[node_index(id)]; }

  std::size_t mirror_index(std::size_t link_idx) const { return mirror_[link_idx]; }
  std::size_t stream_index(std::size_t link_idx) const { return stream_[link_idx]; }
  std::size_t from_index(std::size_t link_idx) const { return from_[link_idx]; }
  std::size_t to_index(std::size_t link_idx) const { return to_[link_idx]; }

  /// (a, a') with a' the opposite-direction link of the same stream.
  std::pair<LinkId, LinkId> stream_of(LinkId id) const {
    const auto idx = link_index(id);
    return {id, links_[mirror_[idx]].id};
  }

  /// Outgoing link positions of a node, ascending by link id.
  std::span<const std::size_t> out_links(std::size_t node_idx) const {
    return {out_.data() + out_begin_[node_idx], out_begin_[node_idx + 1] - out_begin_[node_idx]};
  }
  std::span<const std::size_t> in_links(std::size_t node_idx) const {
    return {in_.data() + in_begin_[node_idx], in_begin_[node_idx + 1] - in_begin_[node_idx]};
  }

  bool centroid(std::size_t node_idx) const { return is_centroid(nodes_[node_idx].kind); }

 private:
  friend Network build_network(std::vector<Node>, std::vector<Link>, NetworkOptions);

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  NetworkOptions options_;
  std::unordered_map<NodeId, std::size_t> node_pos_;
  std::unordered_map<LinkId, std::size_t> link_pos_;
  std::vector<std::size_t> mirror_, stream_, from_, to_;
  std::size_t stream_count_ = 0;
  std::vector<std::size_t> out_begin_, out_, in_begin_, in_;
};

namespace detail {

inline bool same_attribute(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
}

inline void check_positive(const Link& l) {
  auto bad = [&](const char* what, double v) {
    if (!(v > 0.0) || !std::isfinite(v))
      fail(ErrorCode::NonPositiveAttribute,
           "link " + std::to_string(l.id) + " " + what + " = " + std::to_string(v));
  };
  bad("length", l.length);
  bad("width", l.width);
  bad("capacity", l.capacity);
  bad("free_flow_time", l.free_flow_time);
}

}  // namespace detail

/// Validates nodes and links, resolves stream pairing and builds adjacency.
/// Links without an explicit mirror are paired with the lowest-id unpaired link
/// running between the same nodes in the opposite direction.
inline Network build_network(std::vector<Node> nodes, std::vector<Link> links,
                             NetworkOptions options = {}) {
  if (!(options.flow_scale > 0.0) || !std::isfinite(options.flow_scale))
    fail(ErrorCode::InvalidInput, "flow_scale must be positive");

  Network net;
  net.options_ = options;
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.id < b.id; });

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!std::isfinite(nodes[i].position.x) || !std::isfinite(nodes[i].position.y))
      fail(ErrorCode::InvalidInput, "node " + std::to_string(nodes[i].id) + " has non-finite position");
    if (!net.node_pos_.emplace(nodes[i].id, i).second)
      fail(ErrorCode::InvalidInput, "duplicate node id " + std::to_string(nodes[i].id));
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (!net.link_pos_.emplace(l.id, i).second)
      fail(ErrorCode::InvalidInput, "duplicate link id " + std::to_string(l.id));
    if (!net.node_pos_.count(l.from) || !net.node_pos_.count(l.to))
      fail(ErrorCode::DanglingReference, "link " + std::to_string(l.id) + " references a missing node");
    if (l.from == l.to) fail(ErrorCode::InvalidInput, "link " + std::to_string(l.id) + " is a self-loop");
    detail::check_positive(l);
  }

  const std::size_t n = links.size();
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> mirror(n, none);

  // Explicit pairings first.
  for (std::size_t i = 0; i < n; ++i) {
    if (!links[i].mirror) continue;
    auto it = net.link_pos_.find(*links[i].mirror);
    if (it == net.link_pos_.end())
      fail(ErrorCode::DanglingReference, "link " + std::to_string(links[i].id) + " mirror " +
                                             std::to_string(*links[i].mirror) + " does not exist");
    const std::size_t j = it->second;
    const Link& a = links[i];
    const Link& b = links[j];
    if (a.from != b.to || a.to != b.from)
      fail(ErrorCode::MissingMirror, "link " + std::to_string(a.id) + " and its mirror " +
                                         std::to_string(b.id) + " are not reversed");
    if (b.mirror && *b.mirror != a.id)
      fail(ErrorCode::MissingMirror, "mirror of " + std::to_string(b.id) + " is not " + std::to_string(a.id));
    if ((mirror[i] != none && mirror[i] != j) || (mirror[j] != none && mirror[j] != i))
      fail(ErrorCode::MissingMirror, "link " + std::to_string(b.id) + " is paired twice");
    mirror[i] = j;
    mirror[j] = i;
  }

  // Auto-pairing by reversed endpoints, lowest id first.
  std::map<std::pair<NodeId, NodeId>, std::vector<std::size_t>> unpaired;
  for (std::size_t i = 0; i < n; ++i)
    if (mirror[i] == none) unpaired[{links[i].from, links[i].to}].push_back(i);
  for (std::size_t i = 0; i < n; ++i) {
    if (mirror[i] != none) continue;
    auto it = unpaired.find({links[i].to, links[i].from});
    std::size_t j = none;
    if (it != unpaired.end())
      for (std::size_t c : it->second)
        if (mirror[c] == none) { j = c; break; }
    if (j == none) fail(ErrorCode::MissingMirror, "link " + std::to_string(links[i].id) + " has no reverse twin");
    mirror[i] = j;
    mirror[j] = i;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Link& a = links[i];
    const Link& b = links[mirror[i]];
    if (!detail::same_attribute(a.length, b.length) || !detail::same_attribute(a.width, b.width) ||
        !detail::same_attribute(a.capacity, b.capacity) ||
        !detail::same_attribute(a.free_flow_time, b.free_flow_time))
      fail(ErrorCode::AttributeMismatch,
           "links " + std::to_string(a.id) + " and " + std::to_string(b.id) + " differ in stream attributes");
    links[i].mirror = b.id;
  }

  net.mirror_ = std::move(mirror);
  net.stream_.assign(n, 0);
  std::size_t streams = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (i < net.mirror_[i]) {
      net.stream_[i] = streams;
      net.stream_[net.mirror_[i]] = streams;
      ++streams;
    }
  net.stream_count_ = streams;

  net.from_.resize(n);
  net.to_.resize(n);
  const std::size_t nn = nodes.size();
  net.out_begin_.assign(nn + 1, 0);
  net.in_begin_.assign(nn + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    net.from_[i] = net.node_pos_.at(links[i].from);
    net.to_[i] = net.node_pos_.at(links[i].to);
    ++net.out_begin_[net.from_[i] + 1];
    ++net.in_begin_[net.to_[i] + 1];
  }
  for (std::size_t v = 0; v < nn; ++v) {
    net.out_begin_[v + 1] += net.out_begin_[v];
    net.in_begin_[v + 1] += net.in_begin_[v];
  }
  net.out_.resize(n);
  net.in_.resize(n);
  auto out_fill = net.out_begin_;
  auto in_fill = net.in_begin_;
  // Links are sorted by id, so each adjacency list ends up ascending by id.
  for (std::size_t i = 0; i < n; ++i) {
    net.out_[out_fill[net.from_[i]]++] = i;
    net.in_[in_fill[net.to_[i]]++] = i;
  }

  net.nodes_ = std::move(nodes);
  net.links_ = std::move(links);
  return net;
}

/// Checks a demand table against a network: endpoints exist, demand positive,
/// pairs unique, period positive.
inline void validate_demand(const Network& net, const DemandTable& demand) {
  if (!(demand.period_s > 0.0)) fail(ErrorCode::NonPositivePeriod, "analysis period must be positive");
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& e : demand.entries) {
    if (!net.has_node(e.origin) || !net.has_node(e.destination))
      fail(ErrorCode::DanglingReference, "OD (" + std::to_string(e.origin) + ", " +
                                             std::to_string(e.destination) + ") references a missing node");
    if (e.origin == e.destination)
      fail(ErrorCode::InvalidInput, "OD origin equals destination at node " + std::to_string(e.origin));
    if (!(e.demand > 0.0) || !std::isfinite(e.demand))
      fail(ErrorCode::NonPositiveAttribute, "OD (" + std::to_string(e.origin) + ", " +
                                                std::to_string(e.destination) + ") demand must be positive");
    if (!seen.emplace(e.origin, e.destination).second)
      fail(ErrorCode::DuplicateOD,
           "(" + std::to_string(e.origin) + ", " + std::to_string(e.destination) + ") listed twice");
  }
}

inline Network build_network(std::vector<Node> nodes, std::vector<Link> links, const DemandTable& demand,
                             NetworkOptions options = {}) {
  Network net = build_network(std::move(nodes), std::move(links), options);
  validate_demand(net, demand);
  return net;
}

/// x_a = volume_a / (width_a * period_h) * flow_scale, in ped/m/hr.
inline FlowVector volumes_to_flows(std::span<const double> volumes, const Network& net, double period_s) {
  if (!(period_s > 0.0)) fail(ErrorCode::NonPositivePeriod, "period must be positive");
  if (volumes.size() != net.link_count())
    fail(ErrorCode::LengthMismatch, "volume vector does not match link count");
  const double hours = period_s / 3600.0;
  FlowVector flows(volumes.size());
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    if (!(volumes[i] >= 0.0)) fail(ErrorCode::InvalidFlow, "negative volume on link " + std::to_string(net.links()[i].id));
    flows[i] = volumes[i] / (net.links()[i].width * hours) * net.flow_scale();
  }
  return flows;
}

inline std::vector<double> flows_to_volumes(std::span<const double> flows, const Network& net, double period_s) {
  if (!(period_s > 0.0)) fail(ErrorCode::NonPositivePeriod, "period must be positive");
  const double hours = period_s / 3600.0;
  std::vector<double> v(flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i)
    v[i] = flows[i] * net.links()[i].width * hours / net.flow_scale();
  return v;
}

/// Returns a network without the given links and their mirrors. Listing only
/// one direction of a stream closes both; a warning is appended per such link.
/// Nodes left without any link are dropped.
inline Network close_links(const Network& net, std::span<const LinkId> ids,
                           std::vector<std::string>* warnings = nullptr) {
  std::set<LinkId> requested(ids.begin(), ids.end());
  std::set<LinkId> closed;
  for (LinkId id : requested) {
    const auto [a, b] = net.stream_of(id);
    closed.insert(a);
    closed.insert(b);
    if (!requested.count(b) && warnings)
      warnings->push_back("HalfStreamClosure: link " + std::to_string(a) + " listed without mirror " +
                          std::to_string(b) + "; closing both");
  }
  std::vector<Link> links;
  std::set<NodeId> used;
  for (const Link& l : net.links()) {
    if (closed.count(l.id)) continue;
    links.push_back(l);
    used.insert(l.from);
    used.insert(l.to);
  }
  std::vector<Node> nodes;
  for (const Node& nd : net.nodes())
    if (used.count(nd.id)) nodes.push_back(nd);
  return build_network(std::move(nodes), std::move(links), net.options());
}

}  // namespace ptap
