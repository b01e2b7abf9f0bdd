#pragma once

#include <vector>

#include "ptap/network.hpp"

namespace ptap::testing {

// Four nodes A(1) B(2) C(3) D(4) on a square, eight 12 m links of width 1 m,
// free-flow speed 1.46 m/s. Link ids: 1 A-B, 2 B-A, 3 C-A, 4 A-C, 5 D-B,
// 6 B-D, 7 D-C, 8 C-D.
inline constexpr double kToyLength = 12.0;
inline constexpr double kToySpeed = 1.46;
inline constexpr double kToyCapacity = 4847.0;
inline constexpr double kToyPeriod = 60.0;

inline std::vector<Node> toy_nodes() {
  return {{1, {0, 12}, NodeKind::intersection},
          {2, {12, 12}, NodeKind::intersection},
          {3, {0, 0}, NodeKind::intersection},
          {4, {12, 0}, NodeKind::intersection}};
}

inline std::vector<Link> toy_links() {
  auto mk = [](LinkId id, NodeId f, NodeId t) {
    Link l;
    l.id = id;
    l.from = f;
    l.to = t;
    l.length = kToyLength;
    l.width = 1.0;
    l.capacity = kToyCapacity;
    l.free_flow_time = kToyLength / kToySpeed;
    return l;
  };
  return {mk(1, 1, 2), mk(2, 2, 1), mk(3, 3, 1), mk(4, 1, 3),
          mk(5, 4, 2), mk(6, 2, 4), mk(7, 4, 3), mk(8, 3, 4)};
}

inline Network toy_network(double flow_scale = 1.0) {
  return build_network(toy_nodes(), toy_links(), NetworkOptions{flow_scale});
}

inline DemandTable toy_case1() { return {{{3, 2, 10.0}}, kToyPeriod}; }
inline DemandTable toy_case2() { return {{{3, 2, 10.0}, {2, 1, 8.0}}, kToyPeriod}; }

// Flow scale under which the toy network reproduces the reference toy travel
// times (8.47 s for case 1, 9.87 / 9.79 s on A-B / B-A for case 3).
inline constexpr double kToyTableFlowScale = 3.0;

}  // namespace ptap::testing
