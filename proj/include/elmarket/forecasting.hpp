#pragma once

// Market history and the learned price/surplus models built on top of it.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "elmarket/common.hpp"
#include "elmarket/kernel_svr.hpp"
#include "elmarket/market_clearing.hpp"

namespace elmarket::forecast {

struct PriceFeature {
  double load = 0.0;
  DayType day_type = DayType::Weekday;
  int hour = 0;

  svr::FeatureVector vector() const;
};

struct SurplusFeature {
  double load = 0.0;
  DayType day_type = DayType::Weekday;
  int hour = 0;
  double bid_price = 0.0;

  svr::FeatureVector vector() const;
};

struct BidEntry {
  market::Bid bid;
  BidRationale rationale = BidRationale::random;
};

struct HourRecord {
  int day = 1;  // 1-based
  int hour = 0;
  DayType day_type = DayType::Weekday;
  double load = 0.0;
  std::vector<BidEntry> bids;  // producer order
  market::ClearingResult result;
  std::map<ProducerId, double> surplus;
  std::map<ProducerId, double> forecasts;  // price forecast made by each forecaster

  const BidEntry* bid_of(const ProducerId& id) const;
  double surplus_of(const ProducerId& id) const;
};

/// Append-only hourly record, strictly ordered by (day, hour).
class MarketHistory {
 public:
  void append(HourRecord record);

  const std::vector<HourRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  int last_day() const;

  /// Records whose day lies in the trailing `window_days` days. A window
  /// longer than the history covers all of it.
  std::span<const HourRecord> window(int window_days) const;

 private:
  std::vector<HourRecord> records_;
};

svr::TrainingSet build_price_dataset(const MarketHistory& h, int window_days);
svr::TrainingSet build_surplus_dataset(const MarketHistory& h, const ProducerId& producer_id,
                                       int window_days);

/// Lowest and highest own bid price in the trailing window.
std::pair<double, double> own_bid_range(const MarketHistory& h, const ProducerId& producer_id,
                                        int window_days);

enum class EpsilonUnits {
  target,             // epsilon is in the target's own units
  fraction_of_range,  // epsilon is a fraction of the observed target range
};

struct ModelSettings {
  svr::SvrHyperparams svr{};
  EpsilonUnits epsilon_units = EpsilonUnits::target;
};

/// SVR on targets mapped affinely onto [0, 1]; the KKT tolerance therefore
/// applies in scaled target units.
struct LearnedModel {
  svr::SvrModel svr;
  double target_offset = 0.0;
  double target_scale = 1.0;
  bool converged = true;
  double kkt_residual = 0.0;

  double predict(std::span<const double> x) const;
};

LearnedModel fit_model(const svr::TrainingSet& ts, const ModelSettings& settings);

/// Predicted price clamped to [0, price_cap].
double forecast_price(const LearnedModel& m, const PriceFeature& f, double price_cap);

struct HourErrorStats {
  double mu = 0.0;
  double sigma = 0.0;
  int sample_count = 0;

  bool usable() const { return sample_count >= 2; }
};

struct ForecastErrorStats {
  std::array<HourErrorStats, kHoursPerDay> hours{};

  const HourErrorStats& at(int hour) const;
};

struct ForecastObservation {
  int day = 1;
  int hour = 0;
  double forecast = 0.0;
  double actual = 0.0;
};

/// Per hour of day: mean and sample standard deviation of actual - forecast
/// over the trailing window (relative to the latest observed day).
ForecastErrorStats update_error_stats(std::span<const ForecastObservation> pairs,
                                      int window_days);

/// The (forecast, clearing price) pairs a forecaster recorded in `h`.
std::vector<ForecastObservation> forecast_observations(const MarketHistory& h,
                                                       const ProducerId& forecaster);

}  // namespace elmarket::forecast
