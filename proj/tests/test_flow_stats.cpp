#include <doctest.h>

#include <algorithm>
#include <random>

#include "flowcorr/flow_stats.hpp"
#include "helpers.hpp"

using namespace flowcorr;
using testutil::down_flow;
using testutil::make_flow;

TEST_CASE("single packet degenerates to at = tt = 0") {
  Flow flow = down_flow("S1", {{10.0, 512}});
  FlowStats s = compute_stats(flow, Direction::Downstream);
  CHECK(s.tp == 1);
  CHECK(s.at == 0.0);
  CHECK(s.td == 512);
  CHECK(s.tt == 0.0);
  CHECK(s.frame == TimeFrame{10.0, 10.0});
}

TEST_CASE("by-definition arithmetic") {
  Flow flow = down_flow("S1", {{0.0, 100}, {1.0, 200}, {3.0, 300}});
  FlowStats s = compute_stats(flow, Direction::Downstream);
  CHECK(s.tp == 3);
  CHECK(s.at == doctest::Approx(1.5));
  CHECK(s.td == 600);
  CHECK(s.tt == doctest::Approx(3.0));
  CHECK(s.frame == TimeFrame{0.0, 3.0});
}

TEST_CASE("wrong direction raises empty-flow error") {
  Flow flow = make_flow("S1", {{1.0, Direction::Upstream, 100}});
  CHECK_THROWS_AS(compute_stats(flow, Direction::Downstream), EmptyFlowError);
  CHECK_NOTHROW(compute_stats(flow, Direction::Upstream));
}

TEST_CASE("stats properties") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Flow flow = testutil::random_flow("C1", rng);
    FlowStats base = compute_stats(flow, Direction::Downstream);

    // reorder invariance
    Flow shuffled = flow;
    std::shuffle(shuffled.packets.begin(), shuffled.packets.end(), rng);
    CHECK(compute_stats(shuffled, Direction::Downstream) == base);

    // scaling sizes by k scales td only
    Flow scaled = flow;
    for (auto& p : scaled.packets) p.size *= 3;
    FlowStats s = compute_stats(scaled, Direction::Downstream);
    CHECK(s.td == base.td * 3);
    CHECK(s.tp == base.tp);
    CHECK(s.at == base.at);
    CHECK(s.tt == base.tt);

    // shifting timestamps shifts the frame only
    Flow shifted = flow;
    for (auto& p : shifted.packets) p.timestamp += 5.0;
    s = compute_stats(shifted, Direction::Downstream);
    CHECK(s.tp == base.tp);
    CHECK(s.td == base.td);
    CHECK(s.at == doctest::Approx(base.at));
    CHECK(s.tt == doctest::Approx(base.tt));
    CHECK(s.frame.start == doctest::Approx(base.frame.start + 5.0));
    CHECK(s.frame.end == doctest::Approx(base.frame.end + 5.0));

    // at = tt / (tp - 1) for tp >= 2
    if (base.tp >= 2) CHECK(base.at == doctest::Approx(base.tt / double(base.tp - 1)));
  }
}

TEST_CASE("time_slice keeps the closed window") {
  Flow flow = down_flow("C1", {{1.0, 10}, {5.0, 20}, {9.0, 30}});

  SUBCASE("interior packet only") {
    Flow sliced = time_slice(flow, {4.0, 6.0}, 0.0);
    REQUIRE(sliced.packets.size() == 1);
    CHECK(sliced.packets[0].timestamp == 5.0);
    CHECK(sliced.conn == flow.conn);
  }
  SUBCASE("large slack is the identity") {
    CHECK(time_slice(flow, {4.0, 6.0}, 100.0) == flow);
  }
  SUBCASE("disjoint frame empties the flow") {
    CHECK(time_slice(flow, {20.0, 30.0}, 0.0).packets.empty());
  }
  SUBCASE("boundaries are inclusive") {
    Flow sliced = time_slice(flow, {5.0, 5.0}, 0.0);
    CHECK(sliced.packets.size() == 1);
    sliced = time_slice(flow, {3.0, 4.0}, 1.0);
    CHECK(sliced.packets.size() == 1);
  }
  SUBCASE("idempotent") {
    Flow once = time_slice(flow, {2.0, 8.0}, 0.5);
    CHECK(time_slice(once, {2.0, 8.0}, 0.5) == once);
  }
}
