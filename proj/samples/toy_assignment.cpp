// Solves the four-node toy network under each pVDF family and prints the
// C-A volume and the A-B / B-A travel times.
#include <cstdio>

#include "ptap/assignment.hpp"

using namespace ptap;

int main() {
  std::vector<Node> nodes{{1, {0, 12}, NodeKind::intersection},
                          {2, {12, 12}, NodeKind::intersection},
                          {3, {0, 0}, NodeKind::intersection},
                          {4, {12, 0}, NodeKind::intersection}};
  std::vector<Link> links;
  const std::pair<NodeId, NodeId> ends[] = {{1, 2}, {2, 1}, {3, 1}, {1, 3}, {4, 2}, {2, 4}, {4, 3}, {3, 4}};
  LinkId id = 1;
  for (auto [from, to] : ends) {
    Link l;
    l.id = id++;
    l.from = from;
    l.to = to;
    l.length = 12.0;
    l.width = 1.0;
    l.capacity = 4847.0;
    l.free_flow_time = 12.0 / 1.46;
    links.push_back(l);
  }
  const Network net = build_network(nodes, links, NetworkOptions{3.0});
  const DemandTable demand{{{3, 2, 10.0}, {2, 1, 8.0}}, 60.0};

  SolverConfig solver;
  solver.max_iterations = 2000;
  solver.gap_tolerance = 1e-6;
  solver.seed = 1;
  std::printf("%-17s %8s %8s %8s\n", "family", "vol C-A", "t A-B", "t B-A");
  for (auto family : {PvdfFamily::det_symmetric, PvdfFamily::det_asymmetric, PvdfFamily::stoch_symmetric,
                      PvdfFamily::stoch_asymmetric}) {
    PvdfConfig pvdf;
    pvdf.family = family;
    const auto r = solve(net, demand, pvdf, solver);
    std::printf("%-17s %8.3f %8.3f %8.3f\n", std::string(to_string(family)).c_str(),
                r.link_volumes[net.link_index(3)], r.link_times[net.link_index(1)], r.link_times[net.link_index(2)]);
  }
}
