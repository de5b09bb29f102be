#include <doctest.h>

#include <sstream>

#include "roadwork/errors.hpp"
#include "roadwork/network.hpp"
#include "support.hpp"

using namespace roadwork;
using namespace roadwork::testing;

namespace {

const char* kTinyNet = R"(<NUMBER OF ZONES> 3
<NUMBER OF NODES> 3
<FIRST THRU NODE> 1
<NUMBER OF LINKS> 3
<END OF METADATA>

~ init term capacity length fft b power speed toll type ;
  1 2 100 1 10 0.15 4 0 0 1 ;
  2 3 100 1 5 0.15 4 0 0 1 ;
  1 3 50 1 20 0.15 4 0 0 1 ;
)";

const char* kTinyTrips = R"(<NUMBER OF ZONES> 3
<TOTAL OD FLOW> 30
<END OF METADATA>

Origin 1
    2 : 10.0; 3 : 20.0; 1 : 0.0;
Origin 2
    3 : 0.0;
)";

TntpData tiny() {
  std::istringstream net(kTinyNet), trips(kTinyTrips);
  return load_tntp(net, trips);
}

}  // namespace

TEST_CASE("bundled Sioux Falls parses to 24 nodes, 76 links, 528 OD pairs") {
  const auto& sf = sioux_falls();
  CHECK(sf.network.node_count() == 24);
  CHECK(sf.network.link_count() == 76);
  CHECK(sf.demand.positive_count() == 528);
  CHECK(sf.demand.total() == doctest::Approx(360600.0));
  for (const auto& l : sf.network.links()) {
    CHECK(l.fft > 0);
    CHECK(l.capacity > 0);
    CHECK(l.alpha == 0.15);
    CHECK(l.beta == 4.0);
  }
}

TEST_CASE("link ids follow file order and zero demands are dropped") {
  const auto d = tiny();
  REQUIRE(d.network.link_count() == 3);
  CHECK(d.network.node_id(d.network.link(0).tail) == 1);
  CHECK(d.network.node_id(d.network.link(0).head) == 2);
  CHECK(d.network.link(2).fft == 20.0);
  CHECK(d.demand.entries().size() == 2);
  CHECK(d.demand.total() == 30.0);
}

TEST_CASE("empty network file is rejected") {
  std::istringstream net(""), trips("");
  CHECK_THROWS_AS(load_tntp(net, trips), ParseError);
  std::istringstream net2(""), trips2("");
  CHECK_THROWS_WITH(load_tntp(net2, trips2), doctest::Contains("no link records"));
}

TEST_CASE("trips naming an unknown node are rejected") {
  std::istringstream net(kTinyNet), trips("Origin 1\n 99 : 5.0;\n");
  CHECK_THROWS_AS(load_tntp(net, trips), ValidationError);
}

TEST_CASE("malformed link rows report the line number") {
  std::string bad = kTinyNet;
  bad += "  3 1 abc 1 5 0.15 4 0 0 1 ;\n";
  std::istringstream net(bad), trips(kTinyTrips);
  try {
    load_tntp(net, trips);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 11);
  }
}

TEST_CASE("network invariants are enforced") {
  SUBCASE("non-positive free-flow time") {
    CHECK_THROWS_AS(Network::from_records({1, 2}, {{0, 0, 1, 0.0, 10.0}}), ValidationError);
  }
  SUBCASE("non-positive capacity") {
    CHECK_THROWS_AS(Network::from_records({1, 2}, {{0, 0, 1, 1.0, -1.0}}), ValidationError);
  }
  SUBCASE("duplicate directed pair") {
    CHECK_THROWS_AS(Network::from_records({1, 2}, {{0, 0, 1, 1, 1}, {1, 0, 1, 2, 2}}), ValidationError);
  }
  SUBCASE("endpoint out of range") {
    CHECK_THROWS_AS(Network::from_records({1, 2}, {{0, 0, 5, 1, 1}}), ValidationError);
  }
}

TEST_CASE("demand validation") {
  CHECK_THROWS_AS(DemandMatrix({{0, 0, 1.0}}, 2), ValidationError);
  CHECK_THROWS_AS(DemandMatrix({{0, 1, -1.0}}, 2), ValidationError);
  CHECK_THROWS_AS(DemandMatrix({{0, 1, 1.0}, {0, 1, 2.0}}, 2), ValidationError);
}

TEST_CASE("closure configs are sorted sets") {
  const ClosureConfig c({5, 1, 5, 3});
  CHECK(std::vector<LinkId>(c.ids().begin(), c.ids().end()) == std::vector<LinkId>{1, 3, 5});
  CHECK(c.contains(3));
  CHECK_FALSE(c.contains(2));
  CHECK(ClosureConfig{1, 5}.is_subset_of(c));
  CHECK_FALSE(ClosureConfig{1, 2}.is_subset_of(c));
  CHECK(ClosureConfig{}.is_subset_of(c));
  CHECK(c.minus(ClosureConfig{3}) == ClosureConfig{1, 5});
  CHECK(c.unite(ClosureConfig{2}) == ClosureConfig{1, 2, 3, 5});
  CHECK(c.to_string() == "{1,3,5}");
}

TEST_CASE("apply_closures removes links and keeps ids") {
  const auto& sf = sioux_falls();
  const Network closed = apply_closures(sf.network, ClosureConfig{0, 5});
  CHECK(closed.link_count() == 74);
  CHECK_FALSE(closed.has_link(0));
  CHECK_FALSE(closed.has_link(5));
  CHECK(closed.has_link(1));
  CHECK(closed.link(1) == sf.network.link(1));
  CHECK(closed.id_space() == sf.network.id_space());
}

TEST_CASE("closures compose: closing A then B equals closing A union B") {
  const auto& sf = sioux_falls();
  const ClosureConfig a{3, 10}, b{10, 40, 41};
  const Network stepwise = apply_closures(apply_closures(sf.network, a), b.minus(a));
  CHECK(stepwise == apply_closures(sf.network, a.unite(b)));
}

TEST_CASE("empty closure is the identity") {
  const auto& sf = sioux_falls();
  CHECK(apply_closures(sf.network, ClosureConfig{}) == sf.network);
}

TEST_CASE("closing an unknown link is an error") {
  const auto& sf = sioux_falls();
  CHECK_THROWS_AS(validate_closure(sf.network, ClosureConfig{76}), ValidationError);
  CHECK_THROWS_AS(validate_closure(sf.network, ClosureConfig{-1}), ValidationError);
  CHECK_NOTHROW(validate_closure(sf.network, ClosureConfig{0, 75}));
}

TEST_CASE("partial closure scales instead of removing") {
  const auto& sf = sioux_falls();
  AdjustmentTable adj{{4, {0.5, 2.0}}};
  const Network n = apply_closures(sf.network, ClosureConfig{4, 7}, adj);
  CHECK(n.has_link(4));
  CHECK_FALSE(n.has_link(7));
  CHECK(n.link(4).capacity == doctest::Approx(sf.network.link(4).capacity * 0.5));
  CHECK(n.link(4).fft == doctest::Approx(sf.network.link(4).fft * 2.0));
}

TEST_CASE("connectivity check lists severed OD pairs") {
  const auto& sf = sioux_falls();
  CHECK(connectivity_check(sf.network, sf.demand).empty());
  // Node 1 has exactly two outgoing links (ids 0 and 1).
  const Network cut = apply_closures(sf.network, ClosureConfig{0, 1});
  const auto missing = connectivity_check(cut, sf.demand);
  CHECK(missing.size() == 23);
  for (const auto& [o, d] : missing) CHECK(cut.node_id(o) == 1);
}

TEST_CASE("TNTP write and reload round-trips") {
  const auto& sf = sioux_falls();
  std::stringstream net, trips;
  write_tntp_net(net, sf.network);
  write_tntp_trips(trips, sf.network, sf.demand);
  const auto back = load_tntp(net, trips);
  CHECK(back.network == sf.network);
  CHECK(back.demand == sf.demand);
  CHECK(fingerprint(back.network, back.demand) == fingerprint(sf.network, sf.demand));
}

TEST_CASE("fingerprint changes with the network") {
  const auto& sf = sioux_falls();
  const auto base = fingerprint(sf.network, sf.demand);
  CHECK(base.size() == 16);
  CHECK(fingerprint(apply_closures(sf.network, ClosureConfig{2}), sf.demand) != base);
  const auto d = tiny();
  CHECK(fingerprint(d.network, d.demand) != base);
}
