#pragma once

// Scenario engine: a preliminary stage of random bidding followed by a
// strategic stage in which producers bid with their configured strategies,
// retraining their models at day boundaries.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elmarket/common.hpp"
#include "elmarket/forecasting.hpp"
#include "elmarket/strategies.hpp"

namespace elmarket::sim {

struct Producer {
  ProducerId id;
  double marginal_cost = 30.0;
  double capacity = 0.0;
  strategy::StrategyParams strategy = strategy::Random{};
  std::optional<std::uint64_t> rng_seed;  // defaults to a hash of the id

  strategy::ProducerTraits traits() const { return {id, marginal_cost, capacity}; }
};

struct LoadProfileSpec {
  double base = 900.0;
  double daily_amplitude = 350.0;
  double weekend_factor = 0.85;
  double noise_sigma = 25.0;
  int peak_hour = 18;
  std::uint64_t seed = 7;
};

struct DayRange {
  std::string name;
  int first_day = 1;
  int last_day = 1;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::vector<Producer> producers;
  LoadProfileSpec load;
  int preliminary_days = 30;
  int strategic_days = 90;
  double price_cap = 200.0;
  forecast::ModelSettings price_model{};
  forecast::ModelSettings surplus_model{};
  int window_days = 30;
  int retrain_every_days = 1;
  std::uint64_t master_seed = 1;
  // Price forecasters also forecast (without bidding on it) during the
  // preliminary stage, so error statistics exist when strategic bidding
  // starts.
  bool forecast_during_preliminary = true;
  std::vector<DayRange> report_ranges;  // in addition to the two stages

  ScenarioConfig();

  int total_days() const { return preliminary_days + strategic_days; }
  double total_capacity() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct ScenarioReport {
  std::vector<ProducerId> producer_ids;
  std::vector<std::pair<DayRange, std::map<ProducerId, double>>> surplus_by_range;
  std::vector<double> hourly_prices;
  std::vector<std::pair<int, double>> daily_average;
  double hhi = 0.0;
  int shortage_count = 0;
  int unconverged_trainings = 0;

  const std::map<ProducerId, double>& surplus(const std::string& range_name) const;
  double total(const std::string& range_name) const;
  /// Mean of the daily averages over the last `days` complete days.
  double final_average_price(int days) const;
};

struct ScenarioResult {
  forecast::MarketHistory history;
  ScenarioReport report;
};

/// Days 1-5 of each 7-day cycle are weekdays.
DayType day_type_of(int day);

/// Diurnal profile peaking at `peak_hour`, scaled on weekends, with
/// Gaussian noise seeded by (spec.seed, day, hour); clamped to
/// [0.1 base, 0.98 total_capacity].
double generate_load(const LoadProfileSpec& spec, int day, int hour, double total_capacity);

/// Sum of squared percentage capacity shares.
double hhi(std::span<const Producer> producers);
double hhi(std::span<const double> capacities);

std::map<ProducerId, double> aggregate_surplus(const forecast::MarketHistory& h,
                                               const DayRange& range);

/// Mean clearing price of each complete day; a partial last day is skipped.
std::vector<std::pair<int, double>> daily_average_price(const forecast::MarketHistory& h);

ScenarioReport build_report(const ScenarioConfig& cfg, const forecast::MarketHistory& h);

ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Stream seed for a producer, derived from the master seed and the
/// producer's own seed or id only.
std::uint64_t producer_stream_seed(std::uint64_t master_seed, const Producer& p);

}  // namespace elmarket::sim
