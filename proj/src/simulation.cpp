#include "elmarket/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace elmarket::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

template <class T>
const T* strategy_as(const Producer& p) {
  return std::get_if<T>(&p.strategy);
}

}  // namespace

ScenarioConfig::ScenarioConfig() {
  price_model.svr.c = 100.0;
  price_model.svr.epsilon = 1.0;
  price_model.svr.kernel.sigma = 0.5;
  price_model.epsilon_units = forecast::EpsilonUnits::target;
  surplus_model.svr.c = 100.0;
  surplus_model.svr.epsilon = 0.01;
  surplus_model.svr.kernel.sigma = 0.5;
  surplus_model.epsilon_units = forecast::EpsilonUnits::fraction_of_range;
}

double ScenarioConfig::total_capacity() const {
  double t = 0.0;
  for (const auto& p : producers) t += p.capacity;
  return t;
}

void ScenarioConfig::validate() const {
  require(!producers.empty(), "producers: at least one producer is required");
  require(preliminary_days >= 1, "preliminary_days: must be >= 1");
  require(strategic_days >= 0, "strategic_days: must be >= 0");
  require(std::isfinite(price_cap) && price_cap > 0.0, "price_cap: must be positive");
  require(window_days >= 1, "window_days: must be >= 1");
  require(retrain_every_days >= 1, "retrain_every_days: must be >= 1");
  std::set<ProducerId> ids;
  for (std::size_t i = 0; i < producers.size(); ++i) {
    const auto& p = producers[i];
    const std::string where = "producers[" + std::to_string(i) + "]";
    require(!p.id.empty(), where + ".id: must not be empty");
    require(ids.insert(p.id).second, where + ".id: duplicate producer id '" + p.id + "'");
    require(std::isfinite(p.capacity) && p.capacity > 0.0, where + ".capacity: must be positive");
    require(std::isfinite(p.marginal_cost) && p.marginal_cost >= 0.0,
            where + ".marginal_cost: must be nonnegative");
    require(p.marginal_cost <= price_cap, where + ".marginal_cost: exceeds price_cap");
    try {
      strategy::validate(p.strategy, p.marginal_cost, price_cap);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ".strategy: " + e.what());
    }
  }
  require(load.base > 0.0, "load.base: must be positive");
  require(load.daily_amplitude >= 0.0, "load.daily_amplitude: must be nonnegative");
  require(load.weekend_factor > 0.0 && load.weekend_factor <= 1.0,
          "load.weekend_factor: must lie in (0, 1]");
  require(load.noise_sigma >= 0.0, "load.noise_sigma: must be nonnegative");
  require(load.peak_hour >= 0 && load.peak_hour < kHoursPerDay, "load.peak_hour: must lie in [0, 24)");
  require(0.1 * load.base <= 0.98 * total_capacity(),
          "load.base: profile floor exceeds the fleet capacity");
  try {
    price_model.svr.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("svr.price: ") + e.what());
  }
  try {
    surplus_model.svr.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("svr.surplus: ") + e.what());
  }
  for (const auto& r : report_ranges) {
    require(r.first_day >= 1 && r.first_day <= r.last_day && r.last_day <= total_days(),
            "report_ranges." + r.name + ": must lie within the simulated days");
  }
}

const std::map<ProducerId, double>& ScenarioReport::surplus(const std::string& range_name) const {
  for (const auto& [range, totals] : surplus_by_range) {
    if (range.name == range_name) return totals;
  }
  throw std::out_of_range("no report range named " + range_name);
}

double ScenarioReport::total(const std::string& range_name) const {
  double t = 0.0;
  for (const auto& [id, s] : surplus(range_name)) t += s;
  return t;
}

double ScenarioReport::final_average_price(int days) const {
  if (daily_average.empty() || days <= 0) throw std::invalid_argument("no complete days to average");
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(days), daily_average.size());
  double s = 0.0;
  for (std::size_t k = daily_average.size() - n; k < daily_average.size(); ++k) {
    s += daily_average[k].second;
  }
  return s / static_cast<double>(n);
}

DayType day_type_of(int day) {
  return ((day - 1) % 7) < 5 ? DayType::Weekday : DayType::Weekend;
}

double generate_load(const LoadProfileSpec& spec, int day, int hour, double total_capacity) {
  const double phase = 2.0 * std::numbers::pi * (hour - spec.peak_hour) / kHoursPerDay;
  double load = spec.base + spec.daily_amplitude * std::cos(phase);
  if (day_type_of(day) == DayType::Weekend) load *= spec.weekend_factor;
  if (spec.noise_sigma > 0.0) {
    const std::uint64_t slot = static_cast<std::uint64_t>(day) * kHoursPerDay + hour;
    std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(slot)));
    load += std::normal_distribution<double>(0.0, spec.noise_sigma)(rng);
  }
  const double hi = 0.98 * total_capacity;
  const double lo = std::min(0.1 * spec.base, hi);
  return std::clamp(load, lo, hi);
}

double hhi(std::span<const double> capacities) {
  if (capacities.empty()) throw std::invalid_argument("hhi of an empty market");
  double total = 0.0;
  for (double c : capacities) total += c;
  if (!(total > 0.0)) throw std::invalid_argument("hhi needs positive total capacity");
  double index = 0.0;
  for (double c : capacities) {
    const double share = 100.0 * c / total;
    index += share * share;
  }
  return index;
}

double hhi(std::span<const Producer> producers) {
  std::vector<double> caps;
  caps.reserve(producers.size());
  for (const auto& p : producers) caps.push_back(p.capacity);
  return hhi(caps);
}

std::map<ProducerId, double> aggregate_surplus(const forecast::MarketHistory& h,
                                               const DayRange& range) {
  if (range.first_day > range.last_day) throw std::invalid_argument("empty day range");
  std::map<ProducerId, double> totals;
  bool any = false;
  for (const auto& r : h.records()) {
    if (r.day < range.first_day || r.day > range.last_day) continue;
    any = true;
    for (const auto& [id, s] : r.surplus) totals[id] += s;
  }
  if (!any) throw std::invalid_argument("day range holds no history records");
  return totals;
}

std::vector<std::pair<int, double>> daily_average_price(const forecast::MarketHistory& h) {
  std::vector<std::pair<int, double>> out;
  const auto& recs = h.records();
  std::size_t i = 0;
  while (i < recs.size()) {
    const int day = recs[i].day;
    double sum = 0.0;
    int count = 0;
    for (; i < recs.size() && recs[i].day == day; ++i) {
      sum += recs[i].result.mcp;
      ++count;
    }
    if (count == kHoursPerDay) out.emplace_back(day, sum / kHoursPerDay);
  }
  return out;
}

ScenarioReport build_report(const ScenarioConfig& cfg, const forecast::MarketHistory& h) {
  ScenarioReport rep;
  for (const auto& p : cfg.producers) rep.producer_ids.push_back(p.id);
  std::vector<DayRange> ranges{{"preliminary", 1, cfg.preliminary_days}};
  if (cfg.strategic_days > 0)
    ranges.push_back({"strategic", cfg.preliminary_days + 1, cfg.total_days()});
  ranges.insert(ranges.end(), cfg.report_ranges.begin(), cfg.report_ranges.end());
  for (const auto& range : ranges) {
    auto totals = aggregate_surplus(h, range);
    for (const auto& id : rep.producer_ids) totals.try_emplace(id, 0.0);
    rep.surplus_by_range.emplace_back(range, std::move(totals));
  }
  for (const auto& r : h.records()) {
    rep.hourly_prices.push_back(r.result.mcp);
    if (r.result.shortage) ++rep.shortage_count;
  }
  rep.daily_average = daily_average_price(h);
  rep.hhi = hhi(cfg.producers);
  return rep;
}

std::uint64_t producer_stream_seed(std::uint64_t master_seed, const Producer& p) {
  const std::uint64_t own = p.rng_seed ? splitmix64(*p.rng_seed) : fnv1a(p.id);
  return splitmix64(master_seed ^ splitmix64(own));
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const double capacity = cfg.total_capacity();
  const std::size_t n = cfg.producers.size();

  LoadProfileSpec load_spec = cfg.load;
  load_spec.seed = splitmix64(cfg.master_seed ^ splitmix64(cfg.load.seed ^ 0x6c6f6164ULL));

  std::vector<strategy::Rng> rngs;
  rngs.reserve(n);
  for (const auto& p : cfg.producers) rngs.emplace_back(producer_stream_seed(cfg.master_seed, p));

  bool any_price_forecaster = false;
  for (const auto& p : cfg.producers) {
    any_price_forecaster = any_price_forecaster || strategy_as<strategy::PriceForecast>(p);
  }

  ScenarioResult out;
  auto& history = out.history;
  int unconverged = 0;

  std::optional<forecast::LearnedModel> price_model;
  std::vector<std::optional<forecast::LearnedModel>> surplus_models(n);
  std::vector<std::pair<double, double>> bid_ranges(n, {0.0, 0.0});
  std::vector<forecast::ForecastErrorStats> error_stats(n);

  for (int day = 1; day <= cfg.total_days(); ++day) {
    const bool strategic = day > cfg.preliminary_days;
    const bool retrain_day = day > 1 && (day - 1) % cfg.retrain_every_days == 0;

    if (any_price_forecaster && day > 1 && (strategic || cfg.forecast_during_preliminary) &&
        (retrain_day || !price_model)) {
      price_model = forecast::fit_model(forecast::build_price_dataset(history, cfg.window_days),
                                        cfg.price_model);
      if (!price_model->converged) ++unconverged;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = cfg.producers[i];
      if (strategy_as<strategy::PriceForecast>(p) && price_model) {
        const auto obs = forecast::forecast_observations(history, p.id);
        error_stats[i] = forecast::update_error_stats(obs, cfg.window_days);
      }
      if (strategic && strategy_as<strategy::SurplusForecast>(p) &&
          (retrain_day || !surplus_models[i])) {
        surplus_models[i] = forecast::fit_model(
            forecast::build_surplus_dataset(history, p.id, cfg.window_days), cfg.surplus_model);
        if (!surplus_models[i]->converged) ++unconverged;
        bid_ranges[i] = forecast::own_bid_range(history, p.id, cfg.window_days);
      }
    }

    const DayType dt = day_type_of(day);
    for (int hour = 0; hour < kHoursPerDay; ++hour) {
      forecast::HourRecord rec;
      rec.day = day;
      rec.hour = hour;
      rec.day_type = dt;
      rec.load = generate_load(load_spec, day, hour, capacity);

      std::optional<double> p_forecast;
      if (price_model) {
        p_forecast = forecast::forecast_price(*price_model, {rec.load, dt, hour}, cfg.price_cap);
      }

      std::vector<market::Bid> bids;
      bids.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& p = cfg.producers[i];
        const auto traits = p.traits();
        strategy::BidDecision d;
        if (!strategic) {
          d = strategy::bid_random(traits, strategy::Random{}, cfg.price_cap, rngs[i]);
        } else if (const auto* r = strategy_as<strategy::Random>(p)) {
          d = strategy::bid_random(traits, *r, cfg.price_cap, rngs[i]);
        } else if (const auto* f = strategy_as<strategy::PriceForecast>(p)) {
          d = p_forecast ? strategy::bid_price_forecast(traits, *p_forecast, error_stats[i], hour,
                                                        f->alpha, cfg.price_cap)
                         : strategy::bid_marginal_cost(traits);
        } else if (const auto* s = strategy_as<strategy::SurplusForecast>(p)) {
          const forecast::LearnedModel* m = surplus_models[i] ? &*surplus_models[i] : nullptr;
          d = strategy::bid_surplus_forecast(traits, m, rec.load, dt, hour, *s, bid_ranges[i],
                                             cfg.price_cap, rngs[i]);
        } else {
          d = strategy::bid_marginal_cost(traits);
        }
        bids.push_back({p.id, d.price, d.quantity});
        rec.bids.push_back({bids.back(), d.rationale});
        if (p_forecast && strategy_as<strategy::PriceForecast>(p)) rec.forecasts[p.id] = *p_forecast;
      }

      rec.result = market::clear(bids, rec.load, cfg.price_cap);
      for (const auto& p : cfg.producers) {
        rec.surplus[p.id] = market::producer_surplus(rec.result, p.id, p.marginal_cost);
      }
      history.append(std::move(rec));
    }
  }

  out.report = build_report(cfg, history);
  out.report.unconverged_trainings = unconverged;
  return out;
}

}  // namespace elmarket::sim
