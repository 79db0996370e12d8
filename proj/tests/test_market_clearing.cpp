#include <doctest.h>

#include "clearing_properties.hpp"
#include "elmarket/market_clearing.hpp"

using namespace elmarket::market;

TEST_CASE("single bid sets the price when marginal") {
  std::vector<Bid> bids{{"A", 30.0, 100.0}};
  auto r = clear(bids, 50.0, 200.0);
  CHECK(r.mcp == 30.0);
  CHECK(r.dispatched("A") == 50.0);
  CHECK_FALSE(r.shortage);
  CHECK(r.marginal_producer_ids == std::set<ProducerId>{"A"});
}

TEST_CASE("merit order dispatches the cheaper bid first") {
  std::vector<Bid> bids{{"B", 40.0, 100.0}, {"A", 30.0, 100.0}};
  auto r = clear(bids, 150.0, 200.0);
  CHECK(r.mcp == 40.0);
  CHECK(r.dispatched("A") == 100.0);
  CHECK(r.dispatched("B") == 50.0);
}

TEST_CASE("ties at the margin split pro rata") {
  std::vector<Bid> bids{{"A", 30.0, 100.0}, {"B", 30.0, 100.0}};
  auto r = clear(bids, 100.0, 200.0);
  CHECK(r.mcp == 30.0);
  CHECK(r.dispatched("A") == doctest::Approx(50.0));
  CHECK(r.dispatched("B") == doctest::Approx(50.0));

  std::vector<Bid> uneven{{"A", 30.0, 30.0}, {"B", 30.0, 90.0}};
  auto u = clear(uneven, 60.0, 200.0);
  CHECK(u.dispatched("A") == doctest::Approx(15.0));
  CHECK(u.dispatched("B") == doctest::Approx(45.0));
}

TEST_CASE("shortage clears at the cap with full dispatch") {
  std::vector<Bid> bids{{"A", 30.0, 100.0}, {"B", 40.0, 100.0}};
  auto r = clear(bids, 250.0, 200.0);
  CHECK(r.mcp == 200.0);
  CHECK(r.shortage);
  CHECK(r.dispatched("A") == 100.0);
  CHECK(r.dispatched("B") == 100.0);
}

TEST_CASE("clearing edge cases") {
  CHECK_THROWS_AS(clear(std::vector<Bid>{{"A", 30.0, 10.0}}, -1.0, 200.0), std::invalid_argument);

  auto empty = clear(std::vector<Bid>{}, 10.0, 200.0);
  CHECK(empty.shortage);
  CHECK(empty.dispatch.empty());
  CHECK(empty.mcp == 200.0);

  // Load that exactly exhausts a price step is served by that step.
  std::vector<Bid> bids{{"A", 30.0, 100.0}, {"B", 40.0, 100.0}};
  auto exact = clear(bids, 100.0, 200.0);
  CHECK(exact.mcp == 30.0);
  CHECK(exact.dispatched("B") == 0.0);

  auto zero = clear(bids, 0.0, 200.0);
  CHECK(zero.total_dispatched() == 0.0);
  CHECK_FALSE(zero.shortage);
}

TEST_CASE("producer surplus") {
  ClearingResult r;
  r.mcp = 40.0;
  r.dispatch["A"] = 50.0;
  r.dispatch["B"] = 0.0;
  CHECK(producer_surplus(r, "A", 30.0) == 500.0);
  CHECK(producer_surplus(r, "B", 30.0) == 0.0);
  CHECK(producer_surplus(r, "Z", 30.0) == 0.0);
  r.mcp = 30.0;
  r.dispatch["A"] = 100.0;
  CHECK(producer_surplus(r, "A", 30.0) == 0.0);
}

TEST_CASE("clearing properties over random bid sets") {
  std::mt19937_64 rng(99);
  CHECK(props::conservation(rng, 2000) == 0);
  CHECK(props::merit_order_dominance(rng, 2000) == 0);
  CHECK(props::mcp_monotone_in_load(rng, 2000) == 0);
  CHECK(props::pro_rata_ties(rng, 2000) == 0);
  CHECK(props::brute_force_equivalence(rng, 2000) == 0);
}
