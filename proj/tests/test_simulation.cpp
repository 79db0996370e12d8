#include <doctest.h>

#include <cmath>
#include <numeric>

#include "elmarket/simulation.hpp"

using namespace elmarket;
using namespace elmarket::sim;

namespace {

// Small, fast market: four producers, a few days per stage.
ScenarioConfig small_config(strategy::StrategyParams s = strategy::Random{}) {
  ScenarioConfig cfg;
  cfg.name = "small";
  const double caps[] = {300, 250, 200, 150};
  for (int i = 0; i < 4; ++i) {
    Producer p;
    p.id = "P" + std::to_string(i + 1);
    p.capacity = caps[i];
    p.strategy = s;
    cfg.producers.push_back(p);
  }
  cfg.load.base = 500;
  cfg.load.daily_amplitude = 200;
  cfg.preliminary_days = 4;
  cfg.strategic_days = 4;
  cfg.window_days = 4;
  return cfg;
}

double sample_stddev(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1));
}

forecast::HourRecord record(int day, int hour, double mcp, std::map<ProducerId, double> surplus) {
  forecast::HourRecord r;
  r.day = day;
  r.hour = hour;
  r.result.mcp = mcp;
  r.surplus = std::move(surplus);
  return r;
}

}  // namespace

TEST_CASE("load profile examples") {
  LoadProfileSpec flat{500.0, 0.0, 1.0, 0.0, 18, 1};
  for (int d = 1; d <= 8; ++d)
    for (int t = 0; t < 24; ++t) CHECK(generate_load(flat, d, t, 1400.0) == 500.0);

  LoadProfileSpec clean{900.0, 350.0, 0.85, 0.0, 18, 1};
  CHECK(generate_load(clean, 1, 18, 1400.0) == doctest::Approx(1250.0));
  CHECK(generate_load(clean, 1, 6, 1400.0) == doctest::Approx(550.0));
  CHECK(generate_load(clean, 6, 18, 1400.0) == doctest::Approx(1250.0 * 0.85));
  CHECK(generate_load(clean, 1, 18, 1000.0) == doctest::Approx(980.0));  // capacity clamp

  LoadProfileSpec noisy{900.0, 350.0, 0.85, 50.0, 18, 9};
  std::vector<double> residuals;
  for (int k = 0; k < 1000; ++k) {
    const int d = 1 + k / 24, t = k % 24;
    residuals.push_back(generate_load(noisy, d, t, 1e6) - generate_load(clean, d, t, 1e6));
  }
  CHECK(std::abs(sample_stddev(residuals) - 50.0) <= 5.0);
  CHECK(generate_load(noisy, 3, 4, 1400.0) == generate_load(noisy, 3, 4, 1400.0));
}

TEST_CASE("calendar: five weekdays then two weekend days") {
  for (int d = 1; d <= 14; ++d) {
    const bool weekend = d == 6 || d == 7 || d == 13 || d == 14;
    CHECK((day_type_of(d) == DayType::Weekend) == weekend);
  }
}

TEST_CASE("hhi examples") {
  const double duo[] = {70.0, 30.0};
  CHECK(hhi(duo) == doctest::Approx(5800.0).epsilon(1e-12));
  const double mono[] = {123.0};
  CHECK(hhi(mono) == doctest::Approx(10000.0).epsilon(1e-12));
  const double fleet[] = {15, 15, 15, 50, 45, 380, 380, 60, 150, 60, 51, 39, 28, 32, 60, 20};
  CHECK(std::abs(hhi(fleet) - 1702.2) <= 0.1);
  CHECK_THROWS(hhi(std::span<const double>{}));
}

TEST_CASE("surplus aggregation and daily averages") {
  forecast::MarketHistory h;
  h.append(record(1, 0, 50.0, {{"A", 500.0}}));
  const auto one = aggregate_surplus(h, {"r", 1, 1});
  CHECK(one.at("A") == 500.0);
  CHECK_THROWS(aggregate_surplus(h, {"r", 2, 3}));
  CHECK_THROWS(aggregate_surplus(h, {"r", 2, 1}));

  forecast::MarketHistory d;
  for (int t = 0; t < 24; ++t) d.append(record(1, t, t < 12 ? 20.0 : 40.0, {{"A", 0.0}}));
  for (int t = 0; t < 5; ++t) d.append(record(2, t, 99.0, {{"A", 0.0}}));
  const auto avg = daily_average_price(d);
  REQUIRE(avg.size() == 1);
  CHECK(avg[0].first == 1);
  CHECK(avg[0].second == doctest::Approx(30.0));
  CHECK(aggregate_surplus(d, {"all", 1, 2}).at("A") == 0.0);
}

TEST_CASE("identical marginal-cost bidders clear at the marginal cost") {
  const auto r = run_scenario(small_config(strategy::MarginalCost{}));
  for (const auto& rec : r.history.records()) {
    if (rec.day <= 4) continue;
    CHECK(rec.result.mcp == 30.0);
    for (const auto& [id, s] : rec.surplus) CHECK(s == 0.0);
  }
  CHECK(r.report.total("strategic") == 0.0);
}

TEST_CASE("runs are deterministic given the master seed") {
  auto cfg = small_config(strategy::PriceForecast{0.9});
  cfg.producers[0].strategy = strategy::SurplusForecast{};
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    const auto& x = a.history.records()[k];
    const auto& y = b.history.records()[k];
    CHECK(x.load == y.load);
    CHECK(x.result.mcp == y.result.mcp);
    for (std::size_t j = 0; j < x.bids.size(); ++j) CHECK(x.bids[j].bid.price == y.bids[j].bid.price);
  }
  cfg.master_seed = 2;
  const auto c = run_scenario(cfg);
  CHECK(c.history.records()[0].bids[0].bid.price != a.history.records()[0].bids[0].bid.price);
}

TEST_CASE("adding a producer leaves the others' random streams unchanged") {
  auto cfg = small_config();
  const auto a = run_scenario(cfg);
  Producer extra;
  extra.id = "P9";
  extra.capacity = 10;
  cfg.producers.push_back(extra);
  const auto b = run_scenario(cfg);
  for (int k = 0; k < 24; ++k) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(a.history.records()[k].bids[j].bid.price == b.history.records()[k].bids[j].bid.price);
    }
  }
}

TEST_CASE("preliminary stage is random; learned strategies start afterwards") {
  auto cfg = small_config(strategy::PriceForecast{0.95});
  cfg.producers[1].strategy = strategy::SurplusForecast{};
  const auto r = run_scenario(cfg);
  REQUIRE(r.history.size() == 8u * 24u);
  for (const auto& rec : r.history.records()) {
    for (const auto& b : rec.bids) {
      if (rec.day <= 4) {
        CHECK(b.rationale == BidRationale::random);
      } else {
        CHECK(b.rationale != BidRationale::random);
      }
    }
  }
}

TEST_CASE("surplus is never negative and load is conserved") {
  auto cfg = small_config(strategy::PriceForecast{0.7});
  cfg.producers[2].strategy = strategy::SurplusForecast{};
  cfg.producers[3].strategy = strategy::Random{};
  const auto r = run_scenario(cfg);
  std::map<ProducerId, double> cumulative;
  for (const auto& rec : r.history.records()) {
    const double served = std::min(rec.load, cfg.total_capacity());
    CHECK(rec.result.total_dispatched() == doctest::Approx(served).epsilon(1e-12));
    for (const auto& b : rec.bids) {
      CHECK(b.bid.price >= 30.0);
      CHECK(b.bid.price <= cfg.price_cap);
    }
    for (const auto& [id, s] : rec.surplus) {
      CHECK(s >= 0.0);
      cumulative[id] += s;
      CHECK(cumulative[id] >= 0.0);
    }
  }
}

TEST_CASE("report totals equal the hourly surplus sums") {
  auto cfg = small_config(strategy::PriceForecast{0.9});
  cfg.report_ranges.push_back({"last2", 7, 8});
  const auto r = run_scenario(cfg);
  std::map<ProducerId, double> pre, strat, last2;
  for (const auto& rec : r.history.records()) {
    for (const auto& [id, s] : rec.surplus) {
      (rec.day <= 4 ? pre : strat)[id] += s;
      if (rec.day >= 7) last2[id] += s;
    }
  }
  for (const auto& p : cfg.producers) {
    CHECK(r.report.surplus("preliminary").at(p.id) == doctest::Approx(pre[p.id]).epsilon(1e-6));
    CHECK(r.report.surplus("strategic").at(p.id) == doctest::Approx(strat[p.id]).epsilon(1e-6));
    CHECK(r.report.surplus("last2").at(p.id) == doctest::Approx(last2[p.id]).epsilon(1e-6));
  }
  double hourly = 0.0, daily = 0.0;
  for (double p : r.report.hourly_prices) hourly += p;
  for (const auto& [d, avg] : r.report.daily_average) daily += 24.0 * avg;
  CHECK(daily == doctest::Approx(hourly).epsilon(1e-12));
  CHECK(r.report.daily_average.size() == 8);
}

TEST_CASE("invalid scenarios are rejected before simulating") {
  auto cfg = small_config();
  cfg.producers[1].capacity = -5;
  CHECK_THROWS_WITH_AS(run_scenario(cfg), doctest::Contains("producers[1].capacity"),
                       std::invalid_argument);
  cfg = small_config();
  cfg.producers[2].id = cfg.producers[0].id;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("duplicate"), std::invalid_argument);
  cfg = small_config();
  cfg.preliminary_days = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.producers.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
