#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "ptap/assignment.hpp"

using namespace ptap;
using namespace ptap::testing;

namespace {

const double kTau = kToyLength / kToySpeed;

double volume(const Network& net, const AssignmentResult& r, LinkId id) { return r.link_volumes[net.link_index(id)]; }
double time_of(const Network& net, const AssignmentResult& r, LinkId id) { return r.link_times[net.link_index(id)]; }

// Independent evaluation of the toy-case-2 equilibrium: the C-A-B path carries
// x, the C-D-B path 10 - x and B-A carries 8, so the two C->B path costs are
// f(x) + f(x + 8) and 2 f(10 - x). Solved by bisection.
double toy_case2_oracle(double flow_scale) {
  auto f = [&](double ped) {
    const double flow = ped / (1.0 * kToyPeriod / 3600.0) * flow_scale;
    return kTau * (1.0 + 0.949 * std::pow(flow / kToyCapacity, 2.031));
  };
  auto g = [&](double x) { return f(x) + f(x + 8.0) - 2.0 * f(10.0 - x); };
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

SolverConfig tight() {
  SolverConfig s;
  s.max_iterations = 20000;
  s.gap_tolerance = 1e-12;
  return s;
}

void expect_conservation(const Network& net, const DemandTable& demand, const AssignmentResult& r) {
  std::map<std::pair<NodeId, NodeId>, double> per_od;
  std::vector<double> vol(net.link_count(), 0.0);
  for (const auto& p : r.paths) {
    EXPECT_GE(p.flow, 0.0);
    per_od[{p.origin, p.destination}] += p.flow;
    for (LinkId id : p.links) vol[net.link_index(id)] += p.flow;
  }
  for (const auto& e : demand.entries) EXPECT_NEAR((per_od[{e.origin, e.destination}]), e.demand, 1e-9);
  for (std::size_t i = 0; i < vol.size(); ++i) EXPECT_NEAR(vol[i], r.link_volumes[i], 1e-9);
}

}  // namespace

TEST(Oracle, BisectionMatchesFrozenValue) {
  // Frozen from an independent root-finder run on the same equation.
  EXPECT_NEAR(toy_case2_oracle(1.0), 2.4131, 1e-4);
}

TEST(LinkCosts, FreeFlowEqualsTau) {
  const Network net = toy_network();
  const auto c = link_costs(net, FlowVector(8, 0.0), PvdfConfig{});
  for (double t : c.times) EXPECT_DOUBLE_EQ(t, kTau);
  EXPECT_THROW(link_costs(net, FlowVector(3, 0.0), PvdfConfig{}), Error);
  EXPECT_THROW(link_costs(net, FlowVector{-1, 0, 0, 0, 0, 0, 0, 0}, PvdfConfig{}), Error);
}

TEST(LinkCosts, StochasticSameSeedSameView) {
  const Network net = toy_network();
  PvdfConfig cfg;
  cfg.family = PvdfFamily::stoch_symmetric;
  const FlowVector flows{300, 800, 300, 0, 300, 0, 0, 300};
  std::mt19937_64 r1(5), r2(5);
  const auto a = link_costs(net, flows, cfg, SolverMode::stochastic, &r1);
  const auto b = link_costs(net, flows, cfg, SolverMode::stochastic, &r2);
  EXPECT_EQ(a.times, b.times);
  // Symmetric family: both directions of a stream draw the same value.
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(a.times[i], a.times[net.mirror_index(i)]);
}

TEST(ShortestPath, TieBreakAndCost) {
  const Network net = toy_network();
  const auto c = link_costs(net, FlowVector(8, 0.0), PvdfConfig{});
  const Path p = shortest_path(net, c, 3, 2);
  EXPECT_EQ(p.links, (std::vector<LinkId>{3, 1}));  // C-A-B, lexicographically before C-D-B
  EXPECT_NEAR(path_cost(net, c, p), 2 * 12.0 / 1.46, 1e-12);
  EXPECT_NEAR(path_cost(net, c, p), 16.438356164383563, 1e-12);
}

TEST(ShortestPath, UnreachableAfterClosure) {
  const std::vector<LinkId> ids{1, 2, 5, 6};
  const Network net = close_links(toy_network(), ids);
  const auto c = link_costs(net, FlowVector(net.link_count(), 0.0), PvdfConfig{});
  try {
    shortest_path(net, c, 3, 2);
    FAIL();
  } catch (const UnreachableError& e) {
    ASSERT_EQ(e.pairs().size(), 1u);
    EXPECT_EQ(e.pairs()[0], (UnreachableError::OdPair{3, 2}));
  }
}

TEST(ShortestPath, CentroidsAreNotThroughNodes) {
  // A centroid Z bridging C and B with cheap connectors must not be used.
  auto nodes = toy_nodes();
  nodes.push_back({9, {6, 6}, NodeKind::block_centroid});
  auto links = toy_links();
  auto conn = [](LinkId id, NodeId f, NodeId t) {
    Link l;
    l.id = id, l.from = f, l.to = t, l.length = 1, l.width = 1, l.capacity = 4847, l.free_flow_time = 0.1;
    l.kind = LinkKind::connector;
    return l;
  };
  links.push_back(conn(40, 3, 9));
  links.push_back(conn(41, 9, 3));
  links.push_back(conn(42, 9, 2));
  links.push_back(conn(43, 2, 9));
  const Network net = build_network(nodes, links);
  const auto c = link_costs(net, FlowVector(net.link_count(), 0.0), PvdfConfig{});
  EXPECT_EQ(shortest_path(net, c, 3, 2).links, (std::vector<LinkId>{3, 1}));
  EXPECT_EQ(shortest_path(net, c, 9, 2).links, (std::vector<LinkId>{42}));
}

TEST(AllOrNothing, ToyCase1AndSuperposition) {
  const Network net = toy_network();
  const auto c = link_costs(net, FlowVector(8, 0.0), PvdfConfig{});
  const auto v = all_or_nothing(net, c, toy_case1());
  EXPECT_EQ(v[net.link_index(3)], 10.0);
  EXPECT_EQ(v[net.link_index(1)], 10.0);
  double leaving_c = 0;
  for (auto a : net.out_links(net.node_index(3))) leaving_c += v[a];
  EXPECT_EQ(leaving_c, 10.0);

  const auto v2 = all_or_nothing(net, c, DemandTable{{{2, 1, 8.0}}, 60});
  const auto both = all_or_nothing(net, c, toy_case2());
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(both[i], v[i] + v2[i]);
}

TEST(RelativeGap, Definitions) {
  const Network net = toy_network();
  const PvdfConfig cfg;
  // Fresh AON at fixed costs has zero gap under those costs.
  const auto fixed = link_costs(net, FlowVector{900, 0, 900, 0, 0, 0, 0, 0}, cfg);
  const auto aon = all_or_nothing(net, fixed, toy_case1());
  EXPECT_NEAR(relative_gap(net, aon, toy_case1(), fixed), 0.0, 1e-15);

  // Exact 5/5 split is an equilibrium.
  std::vector<double> split{5, 0, 5, 0, 5, 0, 0, 5};
  const auto at_split = link_costs(net, volumes_to_flows(split, net, 60), cfg);
  EXPECT_NEAR(relative_gap(net, split, toy_case1(), at_split), 0.0, 1e-9);

  std::vector<double> lopsided{10, 0, 10, 0, 0, 0, 0, 0};
  const auto at_lop = link_costs(net, volumes_to_flows(lopsided, net, 60), cfg);
  EXPECT_GT(relative_gap(net, lopsided, toy_case1(), at_lop), 0.0);

  try {
    relative_gap(net, std::vector<double>(8, 0.0), DemandTable{{}, 60}, at_lop);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroTSTT);
  }
}

TEST(Solve, ToyCase1) {
  const Network net = toy_network();
  const auto r = solve(net, toy_case1(), PvdfConfig{});
  EXPECT_TRUE(r.converged);
  for (LinkId id : {1, 3, 5, 8}) EXPECT_NEAR(volume(net, r, id), 5.0, 0.05);
  for (LinkId id : {2, 4, 6, 7}) EXPECT_EQ(volume(net, r, id), 0.0);
  for (std::size_t i = 1; i < 8; ++i) EXPECT_NEAR(r.link_times[i], r.link_times[0], 1e-6);
  EXPECT_NEAR(total_system_travel_time(r), 4 * 5 * r.link_times[0], 1e-9);
  EXPECT_EQ(r.tstt, total_system_travel_time(r));
  expect_conservation(net, toy_case1(), r);
}

TEST(Solve, ToyCase1MatchesPublishedTimeUnderTableScale) {
  const Network net = toy_network(kToyTableFlowScale);
  const auto r = solve(net, toy_case1(), PvdfConfig{});
  EXPECT_NEAR(r.link_times[0], 8.47, 0.01);
  EXPECT_NEAR(r.tstt, 169.4, 0.2);
}

TEST(Solve, ToyCase2AgainstOracle) {
  const Network net = toy_network();
  const auto r = solve(net, toy_case2(), PvdfConfig{}, tight());
  const double x = toy_case2_oracle(1.0);
  EXPECT_NEAR(volume(net, r, 3), 2.5, 0.2);
  EXPECT_NEAR(volume(net, r, 1), 2.5, 0.2);
  EXPECT_NEAR(volume(net, r, 8), 7.5, 0.2);
  EXPECT_NEAR(volume(net, r, 5), 7.5, 0.2);
  EXPECT_NEAR(volume(net, r, 2), 8.0, 1e-12);
  EXPECT_NEAR(volume(net, r, 3), x, 1e-3);
  const double cab = time_of(net, r, 3) + time_of(net, r, 1);
  const double cdb = time_of(net, r, 8) + time_of(net, r, 5);
  EXPECT_NEAR(cab, cdb, 0.005 * cdb);
  expect_conservation(net, toy_case2(), r);
}

TEST(Solve, SymmetricSplitIsScaleInvariant) {
  const double base = volume(toy_network(), solve(toy_network(), toy_case2(), PvdfConfig{}, tight()), 3);
  for (double k : {0.1, 10.0}) {
    const Network net = toy_network(k);
    const auto r = solve(net, toy_case2(), PvdfConfig{}, tight());
    EXPECT_NEAR(volume(net, r, 3), base, 1e-3) << "scale " << k;
  }
}

TEST(Solve, MirrorTimesEqualUnderSymmetricFamily) {
  const Network net = toy_network();
  const auto r = solve(net, toy_case2(), PvdfConfig{});
  for (std::size_t i = 0; i < net.link_count(); ++i) EXPECT_EQ(r.link_times[i], r.link_times[net.mirror_index(i)]);
}

TEST(Solve, ZeroDemand) {
  const Network net = toy_network();
  const auto r = solve(net, DemandTable{{}, 60}, PvdfConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  ASSERT_EQ(r.gap_history.size(), 1u);
  for (double v : r.link_volumes) EXPECT_EQ(v, 0.0);
  for (double t : r.link_times) EXPECT_DOUBLE_EQ(t, kTau);
  EXPECT_EQ(r.tstt, 0.0);
}

TEST(Solve, TsttAtLeastFreeFlow) {
  const Network net = toy_network(kToyTableFlowScale);
  const auto r = solve(net, toy_case2(), PvdfConfig{});
  EXPECT_GE(r.tstt, 10 * 2 * kTau + 8 * kTau);
}

TEST(Solve, GapTrendsDown) {
  const Network net = toy_network();
  const auto r = solve(net, toy_case2(), PvdfConfig{}, tight());
  double best = r.gap_history.front();
  for (double g : r.gap_history) best = std::min(best, g);
  EXPECT_LT(best, r.gap_history.front());
  EXPECT_LT(r.gap_history.back(), 1e-6);
}

TEST(Solve, UniqueFromDifferentWarmStarts) {
  const Network net = toy_network();
  SolverConfig a = tight();
  a.max_iterations = 5000;
  SolverConfig b = a;
  b.warm_start = {Path{{8, 5}, 3, 2, 10.0}, Path{{2}, 2, 1, 8.0}};
  a.warm_start = {Path{{3, 1}, 3, 2, 10.0}, Path{{2}, 2, 1, 8.0}};
  const auto ra = solve(net, toy_case2(), PvdfConfig{}, a);
  const auto rb = solve(net, toy_case2(), PvdfConfig{}, b);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(ra.link_volumes[i], rb.link_volumes[i], 1e-2);
}

TEST(Solve, WarmStartValidation) {
  const Network net = toy_network();
  SolverConfig s;
  s.warm_start = {Path{{3, 1}, 3, 2, 9.0}, Path{{2}, 2, 1, 8.0}};
  EXPECT_THROW(solve(net, toy_case2(), PvdfConfig{}, s), Error);
  s.warm_start = {Path{{3, 5}, 3, 2, 10.0}, Path{{2}, 2, 1, 8.0}};
  EXPECT_THROW(solve(net, toy_case2(), PvdfConfig{}, s), Error);
}

TEST(Solve, AsymmetricCase3) {
  const Network net = toy_network(kToyTableFlowScale);
  PvdfConfig cfg;
  cfg.family = PvdfFamily::det_asymmetric;
  const auto r = solve(net, toy_case2(), cfg, tight());
  const double ca = volume(net, r, 3);
  EXPECT_GT(ca, 2.5);
  EXPECT_LT(ca, 5.0);
  EXPECT_NEAR(ca, 3.75, 0.5);
  EXPECT_GT(time_of(net, r, 1), time_of(net, r, 2));  // minor-flow direction A-B is slower
  expect_conservation(net, toy_case2(), r);
}

TEST(Solve, StochasticReproducible) {
  const Network net = toy_network(kToyTableFlowScale);
  PvdfConfig cfg;
  cfg.family = PvdfFamily::stoch_symmetric;
  SolverConfig s;
  s.max_iterations = 60;
  s.seed = 42;
  const auto a = solve(net, toy_case2(), cfg, s);
  const auto b = solve(net, toy_case2(), cfg, s);
  EXPECT_EQ(a.link_volumes, b.link_volumes);
  EXPECT_EQ(a.gap_history, b.gap_history);
  EXPECT_EQ(a.paths.size(), b.paths.size());
  expect_conservation(net, toy_case2(), a);
  s.seed = 43;
  const auto c = solve(net, toy_case2(), cfg, s);
  EXPECT_NE(a.link_volumes, c.link_volumes);
}

TEST(Solve, ThreadCountDoesNotChangeResult) {
  const Network net = toy_network(kToyTableFlowScale);
  PvdfConfig cfg;
  cfg.family = PvdfFamily::stoch_asymmetric;
  SolverConfig s;
  s.max_iterations = 40;
  s.seed = 3;
  const auto one = solve(net, toy_case2(), cfg, s);
  s.threads = 4;
  const auto four = solve(net, toy_case2(), cfg, s);
  EXPECT_EQ(one.link_volumes, four.link_volumes);
}

TEST(Solve, UnreachableListsPairs) {
  const std::vector<LinkId> ids{1, 5};
  const Network net = close_links(toy_network(), ids);
  try {
    solve(net, toy_case2(), PvdfConfig{});
    FAIL();
  } catch (const UnreachableError& e) {
    ASSERT_EQ(e.pairs().size(), 2u);
  }
}

TEST(Summary, ToyCase1) {
  const Network net = toy_network();
  const auto r = solve(net, toy_case1(), PvdfConfig{});
  const auto s = summarize(r, toy_case1());
  EXPECT_EQ(s.empty_links, 4u);
  EXPECT_NEAR(s.average_link_volume, 5.0, 0.05);
  EXPECT_EQ(s.path_count, 2u);
  EXPECT_NEAR(s.average_trip_time, r.tstt / 10.0, 1e-12);
}
