#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ptap/error.hpp"
#include "ptap/geometry.hpp"
#include "ptap/network.hpp"

namespace ptap {

struct Centerline {
  std::int64_t id = 0;
  geo::Polyline polyline;
  std::string road_class;
  friend bool operator==(const Centerline&, const Centerline&) = default;
};

struct GenConfig {
  double offset_distance = 5.0;        // m
  double footpath_width = 2.0;         // m
  double default_capacity = 4847.0;    // ped/m/hr
  double default_speed = 1.46;         // m/s
  double crossing_speed = 1.2;         // m/s, lower to stand in for signal delay
  double midblock_min_length = 12.0;   // m

  void validate() const {
    for (double v : {offset_distance, footpath_width, default_capacity, default_speed, crossing_speed,
                     midblock_min_length})
      if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidInput, "generator settings must be positive");
    if (crossing_speed > default_speed) fail(ErrorCode::InvalidInput, "crossing_speed exceeds default_speed");
  }
};

struct DroppedFeature {
  std::string feature;
  std::string reason;
};

struct GenReport {
  std::map<std::string, std::size_t> node_counts;  // by node kind
  std::map<std::string, std::size_t> link_counts;  // directed links by kind
  std::size_t blocks = 0;
  std::vector<std::pair<NodeId, int>> incomplete_blocks;  // centroid, connector count < 4
  std::vector<DroppedFeature> dropped;
};

struct GenResult {
  Network network;
  GenReport report;
  std::vector<geo::Polyline> link_geometry;  // indexed like network.links()
};

enum class Quadrant { top, right, bottom, left };

inline std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::top: return "top";
    case Quadrant::right: return "right";
    case Quadrant::bottom: return "bottom";
    case Quadrant::left: return "left";
  }
  return "?";
}

/// Azimuth in degrees clockwise from north.
inline Quadrant classify_azimuth(double az) {
  if (az >= 45.0 && az < 135.0) return Quadrant::right;
  if (az >= 135.0 && az < 225.0) return Quadrant::bottom;
  if (az >= 225.0 && az < 315.0) return Quadrant::left;
  return Quadrant::top;
}

namespace netgen_detail {

constexpr double kSnap = 1e-6;

class PointIndex {
 public:
  std::size_t insert(geo::Point p) {
    const auto kx = static_cast<long long>(std::floor(p.x / kCell));
    const auto ky = static_cast<long long>(std::floor(p.y / kCell));
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find({kx + dx, ky + dy});
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second)
          if (geo::distance(points_[i], p) <= kSnap) return i;
      }
    points_.push_back(p);
    cells_[{kx, ky}].push_back(points_.size() - 1);
    return points_.size() - 1;
  }
  const std::vector<geo::Point>& points() const { return points_; }

 private:
  static constexpr double kCell = 1e-3;
  std::vector<geo::Point> points_;
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> cells_;
};

/// A noded straight piece of an input line.
struct Edge {
  std::size_t a = 0, b = 0;
  std::size_t line = 0;  // index into the input vector
  std::size_t seg = 0;
  double t0 = 0.0;       // start parameter within the input segment
};

struct Graph {
  std::vector<geo::Point> points;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> adj;  // edge indices, ascending
};

inline void validate_lines(const std::vector<Centerline>& lines) {
  if (lines.empty()) fail(ErrorCode::EmptyInput, "no centerlines");
  for (const auto& l : lines) {
    if (l.polyline.size() < 2) fail(ErrorCode::InvalidInput, "line " + std::to_string(l.id) + " has < 2 vertices");
    for (std::size_t i = 1; i < l.polyline.size(); ++i)
      if (!(geo::distance(l.polyline[i - 1], l.polyline[i]) > kSnap) || !std::isfinite(l.polyline[i].x) ||
          !std::isfinite(l.polyline[i].y))
        fail(ErrorCode::InvalidInput, "line " + std::to_string(l.id) + " has a zero-length segment");
  }
}

/// Splits every line at shared vertices and at crossings with other lines.
inline Graph node_lines(const std::vector<Centerline>& lines) {
  validate_lines(lines);
  struct Seg {
    geo::Point p, r;
    std::size_t line, seg;
    double minx, maxx, miny, maxy;
    std::vector<double> cuts{0.0, 1.0};
  };
  std::vector<Seg> segs;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& pl = lines[li].polyline;
    for (std::size_t s = 1; s < pl.size(); ++s) {
      const geo::Point p = pl[s - 1], q = pl[s];
      segs.push_back({p, q - p, li, s - 1, std::min(p.x, q.x), std::max(p.x, q.x), std::min(p.y, q.y),
                      std::max(p.y, q.y)});
    }
  }
  std::vector<std::size_t> order(segs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return segs[a].minx < segs[b].minx; });

  auto add_cut = [](Seg& s, double t) {
    const double tol = kSnap / geo::norm(s.r);
    if (t > tol && t < 1.0 - tol) s.cuts.push_back(t);
  };
  auto project = [](const Seg& s, geo::Point x) { return geo::dot(x - s.p, s.r) / geo::dot(s.r, s.r); };

  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    Seg& a = segs[order[oi]];
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      Seg& b = segs[order[oj]];
      if (b.minx > a.maxx + kSnap) break;
      if (b.miny > a.maxy + kSnap || b.maxy < a.miny - kSnap) continue;
      const double denom = geo::cross(a.r, b.r);
      const geo::Point qp = b.p - a.p;
      if (std::abs(denom) > 1e-12 * geo::norm(a.r) * geo::norm(b.r)) {
        const double t = geo::cross(qp, b.r) / denom;
        const double u = geo::cross(qp, a.r) / denom;
        const double ta = kSnap / geo::norm(a.r), tb = kSnap / geo::norm(b.r);
        if (t >= -ta && t <= 1.0 + ta && u >= -tb && u <= 1.0 + tb) {
          add_cut(a, t);
          add_cut(b, u);
        }
      } else if (std::abs(geo::cross(qp, a.r)) <= kSnap * geo::norm(a.r)) {
        // Collinear overlap: cut each at the other's end points.
        add_cut(a, project(a, b.p));
        add_cut(a, project(a, b.p + b.r));
        add_cut(b, project(b, a.p));
        add_cut(b, project(b, a.p + a.r));
      }
    }
  }

  PointIndex index;
  for (const auto& l : lines)
    for (const auto& p : l.polyline) index.insert(p);
  Graph g;
  std::map<std::pair<std::size_t, std::size_t>, bool> seen;
  for (auto& s : segs) {
    std::sort(s.cuts.begin(), s.cuts.end());
    std::size_t prev = index.insert(s.p);
    double prev_t = 0.0;
    for (std::size_t c = 1; c < s.cuts.size(); ++c) {
      const double t = s.cuts[c];
      const std::size_t cur = t == 1.0 ? index.insert(s.p + s.r) : index.insert(s.p + t * s.r);
      if (cur != prev) {
        const auto key = std::minmax(prev, cur);
        if (!seen[{key.first, key.second}]) {
          seen[{key.first, key.second}] = true;
          g.edges.push_back({prev, cur, s.line, s.seg, prev_t});
        }
        prev = cur;
        prev_t = t;
      }
    }
  }
  g.points = index.points();
  g.adj.assign(g.points.size(), {});
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    g.adj[g.edges[e].a].push_back(e);
    g.adj[g.edges[e].b].push_back(e);
  }
  return g;
}

struct Chain {
  std::vector<std::size_t> points;
  std::vector<std::size_t> edges;
  bool ring = false;
};

/// Walks maximal runs through degree-2 vertices. With split_on_class, a
/// degree-2 vertex joining two road classes ends a run.
inline std::vector<Chain> chains(const Graph& g, const std::vector<Centerline>& lines, bool split_on_class) {
  auto is_break = [&](std::size_t v) {
    if (g.adj[v].size() != 2) return true;
    if (!split_on_class) return false;
    return lines[g.edges[g.adj[v][0]].line].road_class != lines[g.edges[g.adj[v][1]].line].road_class;
  };
  std::vector<char> used(g.edges.size(), 0);
  std::vector<Chain> out;
  auto walk = [&](std::size_t start, std::size_t e, bool ring) {
    Chain c;
    c.ring = ring;
    c.points.push_back(start);
    std::size_t cur = start;
    while (true) {
      used[e] = 1;
      c.edges.push_back(e);
      cur = g.edges[e].a == cur ? g.edges[e].b : g.edges[e].a;
      c.points.push_back(cur);
      if (cur == start || is_break(cur)) break;
      const auto& adj = g.adj[cur];
      const std::size_t next = adj[0] == e ? adj[1] : adj[0];
      if (used[next]) break;
      e = next;
    }
    out.push_back(std::move(c));
  };
  for (std::size_t v = 0; v < g.points.size(); ++v)
    if (is_break(v))
      for (std::size_t e : g.adj[v])
        if (!used[e]) walk(v, e, false);
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    if (!used[e]) walk(std::min(g.edges[e].a, g.edges[e].b), e, true);
  return out;
}

inline geo::Polyline drop_collinear(const geo::Polyline& p) {
  geo::Polyline out{p.front()};
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    const geo::Point a = p[i] - out.back(), b = p[i + 1] - p[i];
    const bool straight = std::abs(geo::cross(a, b)) <= 1e-9 * geo::norm(a) * geo::norm(b) && geo::dot(a, b) > 0.0;
    if (!straight) out.push_back(p[i]);
  }
  out.push_back(p.back());
  return out;
}

using PieceKey = std::tuple<std::int64_t, std::size_t, double>;

inline PieceKey edge_key(const std::vector<Centerline>& lines, const Edge& e) {
  return {lines[e.line].id, e.seg, e.t0};
}

struct OrientedChain {
  geo::Polyline polyline;
  std::size_t first_line = 0;  // input index of the lowest contributing line
  PieceKey key;
  std::size_t start = 0, end = 0;  // graph point indices
};

/// Orients each chain along the lowest-keyed input piece it contains.
inline std::vector<OrientedChain> orient(const Graph& g, const std::vector<Centerline>& lines,
                                         const std::vector<Chain>& cs) {
  std::vector<OrientedChain> out;
  for (const auto& c : cs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.edges.size(); ++i)
      if (edge_key(lines, g.edges[c.edges[i]]) < edge_key(lines, g.edges[c.edges[best]])) best = i;
    const Edge& e = g.edges[c.edges[best]];
    std::vector<std::size_t> pts = c.points;
    if (pts[best] != e.a) std::reverse(pts.begin(), pts.end());
    OrientedChain oc;
    for (std::size_t p : pts) oc.polyline.push_back(g.points[p]);
    oc.first_line = e.line;
    oc.key = edge_key(lines, e);
    oc.start = pts.front();
    oc.end = pts.back();
    out.push_back(std::move(oc));
  }
  std::sort(out.begin(), out.end(), [](const OrientedChain& a, const OrientedChain& b) { return a.key < b.key; });
  return out;
}

}  // namespace netgen_detail

/// Keeps the largest connected component (by number of input lines), merges
/// runs of one road class through degree-2 vertices and drops collinear
/// interior vertices. Each output line keeps the id of its lowest
/// contributing input line; extra pieces of a split line get fresh ids.
inline std::vector<Centerline> simplify(const std::vector<Centerline>& lines,
                                        std::vector<DroppedFeature>* dropped = nullptr) {
  using namespace netgen_detail;
  const Graph g = node_lines(lines);

  std::vector<std::size_t> parent(g.points.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : g.edges) parent[find(e.a)] = find(e.b);
  std::map<std::size_t, std::vector<std::size_t>> comp_lines;  // root -> input line indices
  for (const auto& e : g.edges) comp_lines[find(e.a)].push_back(e.line);
  std::size_t keep = 0, best_count = 0, best_first = std::numeric_limits<std::size_t>::max();
  for (auto& [root, ls] : comp_lines) {
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    if (ls.size() > best_count || (ls.size() == best_count && ls.front() < best_first)) {
      keep = root;
      best_count = ls.size();
      best_first = ls.front();
    }
  }
  if (dropped)
    for (const auto& [root, ls] : comp_lines) {
      if (root == keep) continue;
      std::string ids;
      for (std::size_t l : ls) ids += (ids.empty() ? "" : ",") + std::to_string(lines[l].id);
      dropped->push_back({"lines " + ids, "disconnected component (" + std::to_string(ls.size()) + " lines)"});
    }

  std::vector<Chain> kept;
  for (auto& c : chains(g, lines, true))
    if (find(c.points.front()) == keep) kept.push_back(std::move(c));

  std::int64_t next_id = 0;
  for (const auto& l : lines) next_id = std::max(next_id, l.id);
  std::vector<char> id_taken(lines.size(), 0);
  std::vector<Centerline> out;
  for (auto& oc : orient(g, lines, kept)) {
    Centerline c;
    if (!id_taken[oc.first_line]) {
      c.id = lines[oc.first_line].id;
      id_taken[oc.first_line] = 1;
    } else {
      c.id = ++next_id;
    }
    c.polyline = drop_collinear(oc.polyline);
    c.road_class = lines[oc.first_line].road_class;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const Centerline& a, const Centerline& b) { return a.id < b.id; });
  return out;
}

/// Builds the footpath network around the given centerlines: two offset sides
/// per road, corner nodes and crossings at junctions, end nodes at dead ends,
/// midblock nodes on long sides, block centroids with up to four connectors,
/// and a mirror for every link.
inline GenResult build_footpath_graph(const std::vector<Centerline>& lines, const GenConfig& cfg = {}) {
  using namespace netgen_detail;
  using geo::Point;
  using geo::Polyline;
  cfg.validate();
  const Graph g = node_lines(lines);
  const double d = cfg.offset_distance;
  GenReport report;

  std::vector<OrientedChain> roads;
  {
    std::vector<Chain> runs = chains(g, lines, false);
    std::vector<Chain> open;
    for (auto& c : runs) {
      if (c.ring)
        report.dropped.push_back({"line " + std::to_string(lines[g.edges[c.edges.front()].line].id),
                                  "closed ring without junctions"});
      else
        open.push_back(std::move(c));
    }
    roads = orient(g, lines, open);
  }
  if (roads.empty()) fail(ErrorCode::EmptyInput, "no usable centerlines");

  double minx = HUGE_VAL, maxx = -HUGE_VAL, miny = HUGE_VAL, maxy = -HUGE_VAL;
  for (const auto& p : g.points) {
    minx = std::min(minx, p.x), maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y), maxy = std::max(maxy, p.y);
  }
  auto on_boundary = [&](Point p) {
    return std::min({p.x - minx, maxx - p.x, p.y - miny, maxy - p.y}) <= d;
  };

  // Half-edge h = 2r runs along road r, h = 2r + 1 against it.
  const std::size_t H = roads.size() * 2;
  auto origin = [&](std::size_t h) { return h % 2 == 0 ? roads[h / 2].start : roads[h / 2].end; };
  auto target = [&](std::size_t h) { return origin(h ^ 1); };
  auto line_of = [&](std::size_t h) {
    return h % 2 == 0 ? roads[h / 2].polyline : geo::reversed(roads[h / 2].polyline);
  };
  auto road_name = [&](std::size_t h) {
    return "line " + std::to_string(lines[roads[h / 2].first_line].id) + (h % 2 == 0 ? " left side" : " right side");
  };

  std::map<std::size_t, std::vector<std::size_t>> arms;  // junction -> outgoing half-edges, counterclockwise
  std::vector<double> angle(H);
  for (std::size_t h = 0; h < H; ++h) {
    const Polyline pl = line_of(h);
    angle[h] = std::atan2(pl[1].y - pl[0].y, pl[1].x - pl[0].x);
    arms[origin(h)].push_back(h);
  }
  std::vector<std::size_t> arm_pos(H);
  for (auto& [v, hs] : arms) {
    std::sort(hs.begin(), hs.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(angle[a], a) < std::tie(angle[b], b);
    });
    for (std::size_t i = 0; i < hs.size(); ++i) arm_pos[hs[i]] = i;
  }

  struct TmpNode {
    Point p;
    NodeKind kind;
  };
  struct TmpLink {
    std::size_t u, v;
    LinkKind kind;
    Polyline geometry;
  };
  std::vector<TmpNode> nodes;
  std::vector<TmpLink> links;
  auto add_node = [&](Point p, NodeKind k) {
    nodes.push_back({p, k});
    return nodes.size() - 1;
  };

  // Side end points: side of h starts at side_start[h] and ends at side_end[h].
  std::vector<std::size_t> side_start(H), side_end(H);
  for (const auto& [v, hs] : arms) {
    const Point j = g.points[v];
    const std::size_t k = hs.size();
    if (k == 1) {
      const std::size_t h = hs[0];
      const Polyline pl = line_of(h);
      const Point n = geo::left_normal(pl[1] - pl[0]);
      const NodeKind kind = on_boundary(j) ? NodeKind::external_centroid : NodeKind::intersection;
      const std::size_t left = add_node(j + d * n, kind);
      const std::size_t right = add_node(j - d * n, kind);
      side_start[h] = left;
      side_end[h ^ 1] = right;
      if (kind == NodeKind::intersection)
        links.push_back({right, left, LinkKind::crossing, {nodes[right].p, nodes[left].p}});
      continue;
    }
    std::vector<std::size_t> corner(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t a = hs[i], b = hs[(i + 1) % k];
      double theta = angle[b] - angle[a];
      if (theta <= 0.0) theta += 2.0 * std::numbers::pi;
      const Polyline pa = line_of(a);
      const Point ua = geo::unit(pa[1] - pa[0]);
      const double s = std::sin(theta / 2.0);
      const double dist = s > 1.0 / 3.0 ? d / s : 3.0 * d;  // clamp sharp corners
      corner[i] = add_node(j + dist * geo::rotate(ua, theta / 2.0), NodeKind::intersection);
    }
    for (std::size_t i = 0; i < k; ++i) {
      side_start[hs[i]] = corner[i];
      side_end[hs[i] ^ 1] = corner[(i + k - 1) % k];
      const std::size_t before = corner[(i + k - 1) % k], after = corner[i];
      links.push_back({before, after, LinkKind::crossing, {nodes[before].p, nodes[after].p}});
    }
  }

  // Sides, split by a midblock node when long enough.
  std::vector<Polyline> raw_side(H);
  std::vector<std::optional<std::size_t>> midblock(H);
  for (std::size_t h = 0; h < H; ++h) {
    const Polyline pl = line_of(h);
    const Point s = nodes[side_start[h]].p, e = nodes[side_end[h]].p;
    try {
      raw_side[h] = geo::offset_left_raw(pl, d, s, e);
    } catch (const Error&) {
      raw_side[h] = {s, e};
      report.dropped.push_back({road_name(h), "DegenerateOffset: polyline folds back on itself"});
      continue;
    }
    try {
      geo::check_offset(pl, raw_side[h]);
    } catch (const Error& err) {
      report.dropped.push_back({road_name(h), err.what()});
      continue;
    }
    if (side_start[h] == side_end[h] && geo::length(raw_side[h]) <= cfg.midblock_min_length) {
      report.dropped.push_back({road_name(h), "side closes on itself"});
      continue;
    }
    const double len = geo::length(raw_side[h]);
    if (len > cfg.midblock_min_length) {
      auto [head, tail] = geo::split_at(raw_side[h], len / 2.0);
      const std::size_t m = add_node(tail.front(), NodeKind::midblock);
      midblock[h] = m;
      links.push_back({side_start[h], m, LinkKind::footpath, head});
      links.push_back({m, side_end[h], LinkKind::footpath, tail});
    } else {
      links.push_back({side_start[h], side_end[h], LinkKind::footpath, raw_side[h]});
    }
  }

  // Blocks: faces of the centerline arrangement traced with the face on the
  // left. Bounded faces come out counterclockwise.
  auto next_half_edge = [&](std::size_t h) {
    const auto& hs = arms[target(h)];
    const std::size_t j = arm_pos[h ^ 1];
    return hs[(j + hs.size() - 1) % hs.size()];
  };
  std::vector<char> visited(H, 0);
  for (std::size_t h0 = 0; h0 < H; ++h0) {
    if (visited[h0]) continue;
    std::vector<std::size_t> face;
    for (std::size_t h = h0; !visited[h]; h = next_half_edge(h)) {
      visited[h] = 1;
      face.push_back(h);
    }
    Polyline center_ring, side_ring;
    for (std::size_t h : face) {
      const Polyline pl = line_of(h);
      center_ring.insert(center_ring.end(), pl.begin(), pl.end() - 1);
      side_ring.insert(side_ring.end(), raw_side[h].begin(), raw_side[h].end() - 1);
    }
    if (!(geo::signed_area(center_ring) > 0.0)) continue;
    ++report.blocks;
    const auto centroid = geo::signed_area(side_ring) > 0.0 ? geo::polygon_centroid(side_ring) : std::nullopt;
    if (!centroid) {
      report.dropped.push_back({"block at " + road_name(face.front()), "block too small for the offset distance"});
      continue;
    }
    std::map<Quadrant, std::pair<double, std::size_t>> nearest;
    for (std::size_t h : face) {
      if (!midblock[h]) continue;
      const Point m = nodes[*midblock[h]].p;
      const Quadrant q = classify_azimuth(geo::azimuth_deg(*centroid, m));
      const std::pair<double, std::size_t> cand{geo::distance(*centroid, m), *midblock[h]};
      auto it = nearest.find(q);
      if (it == nearest.end() || cand < it->second) nearest[q] = cand;
    }
    if (nearest.empty()) {
      report.dropped.push_back({"block at " + road_name(face.front()), "block has no midblock nodes"});
      continue;
    }
    const std::size_t c = add_node(*centroid, NodeKind::block_centroid);
    for (const auto& [q, cand] : nearest) {
      nodes[cand.second].kind = NodeKind::connector;
      links.push_back({c, cand.second, LinkKind::connector, {*centroid, nodes[cand.second].p}});
    }
    if (nearest.size() < 4) report.incomplete_blocks.push_back({static_cast<NodeId>(c), static_cast<int>(nearest.size())});
  }

  // Stable ids: nodes by position, then links by end point ids.
  std::vector<char> linked(nodes.size(), 0);
  for (const auto& l : links) linked[l.u] = linked[l.v] = 1;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (linked[i]) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::make_tuple(nodes[a].p.x, nodes[a].p.y, static_cast<int>(nodes[a].kind), a) <
           std::make_tuple(nodes[b].p.x, nodes[b].p.y, static_cast<int>(nodes[b].kind), b);
  });
  std::vector<NodeId> id_of(nodes.size(), 0);
  std::vector<Node> out_nodes;
  for (std::size_t i = 0; i < order.size(); ++i) {
    id_of[order[i]] = static_cast<NodeId>(i + 1);
    const auto& n = nodes[order[i]];
    out_nodes.push_back({static_cast<NodeId>(i + 1), {n.p.x + 0.0, n.p.y + 0.0}, n.kind});
  }
  // Block centroid ids in the report were temporary indices.
  for (auto& [c, n] : report.incomplete_blocks) c = id_of[static_cast<std::size_t>(c)];

  std::vector<std::size_t> lorder;
  for (std::size_t i = 0; i < links.size(); ++i) {
    auto& l = links[i];
    if (id_of[l.u] > id_of[l.v]) {
      std::swap(l.u, l.v);
      std::reverse(l.geometry.begin(), l.geometry.end());
    }
    lorder.push_back(i);
  }
  auto link_key = [&](std::size_t i) {
    const auto& l = links[i];
    const Point mid = l.geometry[l.geometry.size() / 2];
    return std::make_tuple(id_of[l.u], id_of[l.v], static_cast<int>(l.kind), mid.x, mid.y, i);
  };
  std::sort(lorder.begin(), lorder.end(), [&](std::size_t a, std::size_t b) { return link_key(a) < link_key(b); });

  std::vector<Link> out_links;
  std::vector<Polyline> geometry;
  for (std::size_t k = 0; k < lorder.size(); ++k) {
    const auto& l = links[lorder[k]];
    const double len = geo::length(l.geometry);
    const double speed = l.kind == LinkKind::crossing ? cfg.crossing_speed : cfg.default_speed;
    Link fwd;
    fwd.id = static_cast<LinkId>(2 * k + 1);
    fwd.from = id_of[l.u];
    fwd.to = id_of[l.v];
    fwd.length = len;
    fwd.width = cfg.footpath_width;
    fwd.capacity = cfg.default_capacity;
    fwd.free_flow_time = len / speed;
    fwd.kind = l.kind;
    fwd.mirror = fwd.id + 1;
    Link back = fwd;
    back.id = fwd.id + 1;
    std::swap(back.from, back.to);
    back.mirror = fwd.id;
    out_links.push_back(fwd);
    out_links.push_back(back);
    geometry.push_back(l.geometry);
    geometry.push_back(geo::reversed(l.geometry));
  }

  for (const auto& n : out_nodes) ++report.node_counts[std::string(to_string(n.kind))];
  for (const auto& l : out_links) ++report.link_counts[std::string(to_string(l.kind))];
  GenResult result{build_network(std::move(out_nodes), std::move(out_links)), std::move(report), {}};
  // Network sorts links by id, which matches the emission order.
  result.link_geometry = std::move(geometry);
  return result;
}

}  // namespace ptap
