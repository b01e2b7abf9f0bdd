#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "ptap/network.hpp"

using namespace ptap;
using namespace ptap::testing;

TEST(BuildNetwork, ToyHasFourStreams) {
  const Network net = toy_network();
  EXPECT_EQ(net.node_count(), 4u);
  EXPECT_EQ(net.link_count(), 8u);
  EXPECT_EQ(net.stream_count(), 4u);
}

TEST(BuildNetwork, MirrorPairingIsPerfectMatching) {
  const Network net = toy_network();
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < net.link_count(); ++i) {
    const auto m = net.mirror_index(i);
    EXPECT_NE(m, i);
    EXPECT_EQ(net.mirror_index(m), i);
    EXPECT_EQ(net.links()[m].from, net.links()[i].to);
    EXPECT_EQ(net.links()[m].to, net.links()[i].from);
    EXPECT_EQ(net.stream_index(i), net.stream_index(m));
    seen.insert(std::min(i, m));
  }
  EXPECT_EQ(seen.size(), net.stream_count());
}

TEST(BuildNetwork, MissingMirror) {
  auto links = toy_links();
  links.pop_back();  // drop C-D, leaving D-C unpaired
  try {
    build_network(toy_nodes(), links);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingMirror);
  }
}

TEST(BuildNetwork, ExplicitMirrorMustBeReversed) {
  auto links = toy_links();
  links[0].mirror = 3;  // A-B paired with C-A
  try {
    build_network(toy_nodes(), links);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingMirror);
  }
}

TEST(BuildNetwork, RejectsBadAttributes) {
  auto links = toy_links();
  links[2].capacity = 0;
  links[3].capacity = 0;
  try {
    build_network(toy_nodes(), links);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveAttribute);
  }
  links = toy_links();
  links[0].width = 2.0;
  try {
    build_network(toy_nodes(), links);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AttributeMismatch);
  }
  links = toy_links();
  links[0].to = 99;
  try {
    build_network(toy_nodes(), links);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingReference);
  }
}

TEST(BuildNetwork, ParallelLinksPairedById) {
  auto links = toy_links();
  Link extra = links[0];
  extra.id = 20;
  Link extra_back = links[1];
  extra_back.id = 21;
  links.push_back(extra);
  links.push_back(extra_back);
  const Network net = build_network(toy_nodes(), links);
  EXPECT_EQ(net.stream_of(1).second, 2);
  EXPECT_EQ(net.stream_of(20).second, 21);
}

TEST(Demand, Validation) {
  const Network net = toy_network();
  EXPECT_NO_THROW(validate_demand(net, toy_case2()));
  EXPECT_NO_THROW(validate_demand(net, DemandTable{{}, 60}));
  DemandTable dup{{{3, 2, 1.0}, {3, 2, 2.0}}, 60};
  try {
    validate_demand(net, dup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateOD);
  }
  EXPECT_THROW(validate_demand(net, DemandTable{{{3, 2, 0.0}}, 60}), Error);
  EXPECT_THROW(validate_demand(net, DemandTable{{{3, 9, 1.0}}, 60}), Error);
  EXPECT_THROW(build_network(toy_nodes(), toy_links(), DemandTable{{{3, 2, 1.0}}, 0.0}), Error);
}

TEST(StreamOf, PairAndInvolution) {
  const Network net = toy_network();
  EXPECT_EQ(net.stream_of(1), (std::pair<LinkId, LinkId>{1, 2}));
  for (const Link& l : net.links()) EXPECT_EQ(net.stream_of(net.stream_of(l.id).second).second, l.id);
  EXPECT_THROW(net.stream_of(42), Error);
}

TEST(StreamOf, ConnectorTreatedLikeFootpath) {
  auto nodes = toy_nodes();
  nodes.push_back({9, {-5, 0}, NodeKind::block_centroid});
  auto links = toy_links();
  Link c;
  c.id = 30, c.from = 9, c.to = 3, c.length = 5, c.width = 1, c.capacity = 4847, c.free_flow_time = 3;
  c.kind = LinkKind::connector;
  Link back = c;
  back.id = 31, back.from = 3, back.to = 9;
  links.push_back(c);
  links.push_back(back);
  const Network net = build_network(nodes, links);
  EXPECT_EQ(net.stream_of(30), (std::pair<LinkId, LinkId>{30, 31}));
}

TEST(VolumesToFlows, UnitConversion) {
  const Network net = toy_network();
  std::vector<double> v(8, 0.0);
  v[0] = 10;
  EXPECT_DOUBLE_EQ(volumes_to_flows(v, net, 3600)[0], 10.0);
  v[0] = 5;
  EXPECT_DOUBLE_EQ(volumes_to_flows(v, net, 60)[0], 300.0);
  EXPECT_EQ(volumes_to_flows(v, net, 60)[1], 0.0);
  EXPECT_THROW(volumes_to_flows(v, net, 0), Error);

  const Network scaled = toy_network(3.0);
  EXPECT_DOUBLE_EQ(volumes_to_flows(v, scaled, 60)[0], 900.0);
  const auto back = flows_to_volumes(volumes_to_flows(v, scaled, 60), scaled, 60);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], v[i], 1e-12);
}

TEST(CloseLinks, RemovesStreamsAndIsIdempotent) {
  const Network net = toy_network();
  const std::vector<LinkId> ids{3, 4, 1, 2};
  const Network closed = close_links(net, ids);
  EXPECT_EQ(closed.link_count(), 4u);
  EXPECT_EQ(net.link_count(), 8u);  // original untouched
  EXPECT_FALSE(closed.has_node(1));  // A is isolated after closing A-B and C-A
  const std::vector<LinkId> twice{3, 3, 4};
  EXPECT_EQ(close_links(net, twice).link_count(), 6u);
}

TEST(CloseLinks, HalfStreamClosesBothWithWarning) {
  const Network net = toy_network();
  std::vector<std::string> warnings;
  const std::vector<LinkId> ids{3};
  const Network closed = close_links(net, ids, &warnings);
  EXPECT_FALSE(closed.has_link(3));
  EXPECT_FALSE(closed.has_link(4));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("HalfStreamClosure"), std::string::npos);
  const std::vector<LinkId> unknown{77};
  EXPECT_THROW(close_links(net, unknown), Error);
}
