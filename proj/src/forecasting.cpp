#include "elmarket/forecasting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elmarket {

std::string_view to_string(BidRationale r) {
  switch (r) {
    case BidRationale::random: return "random";
    case BidRationale::marginal_cost: return "marginal_cost";
    case BidRationale::alpha_quantile: return "alpha_quantile";
    case BidRationale::cost_floor: return "cost_floor";
    case BidRationale::grid_argmax: return "grid_argmax";
    case BidRationale::explore_down: return "explore_down";
    case BidRationale::explore_up: return "explore_up";
    case BidRationale::hold_boundary: return "hold_boundary";
  }
  return "unknown";
}

}  // namespace elmarket

namespace elmarket::forecast {

svr::FeatureVector PriceFeature::vector() const {
  return {load, static_cast<double>(day_type), static_cast<double>(hour)};
}

svr::FeatureVector SurplusFeature::vector() const {
  return {load, static_cast<double>(day_type), static_cast<double>(hour), bid_price};
}

const BidEntry* HourRecord::bid_of(const ProducerId& id) const {
  for (const auto& b : bids) {
    if (b.bid.producer_id == id) return &b;
  }
  return nullptr;
}

double HourRecord::surplus_of(const ProducerId& id) const {
  auto it = surplus.find(id);
  return it == surplus.end() ? 0.0 : it->second;
}

void MarketHistory::append(HourRecord record) {
  if (record.hour < 0 || record.hour >= kHoursPerDay)
    throw std::invalid_argument("hour outside [0, 24)");
  if (record.load < 0.0) throw std::invalid_argument("negative load in history record");
  if (!records_.empty()) {
    const auto& last = records_.back();
    const bool later = record.day > last.day || (record.day == last.day && record.hour > last.hour);
    if (!later) throw std::invalid_argument("history records must be strictly ordered by (day, hour)");
  }
  records_.push_back(std::move(record));
}

int MarketHistory::last_day() const {
  if (records_.empty()) throw std::logic_error("history is empty");
  return records_.back().day;
}

std::span<const HourRecord> MarketHistory::window(int window_days) const {
  if (window_days <= 0) throw std::invalid_argument("window_days must be positive");
  if (records_.empty()) return {};
  const int first_day = last_day() - window_days + 1;
  auto it = std::lower_bound(records_.begin(), records_.end(), first_day,
                             [](const HourRecord& r, int day) { return r.day < day; });
  return {it, records_.end()};
}

svr::TrainingSet build_price_dataset(const MarketHistory& h, int window_days) {
  const auto recs = h.window(window_days);
  if (recs.empty()) throw std::invalid_argument("price dataset window is empty");
  svr::TrainingSet ts;
  ts.feature_dim = 3;
  for (const auto& r : recs) {
    ts.add(PriceFeature{r.load, r.day_type, r.hour}.vector(), r.result.mcp);
  }
  return ts;
}

svr::TrainingSet build_surplus_dataset(const MarketHistory& h, const ProducerId& producer_id,
                                       int window_days) {
  const auto recs = h.window(window_days);
  if (recs.empty()) throw std::invalid_argument("surplus dataset window is empty");
  svr::TrainingSet ts;
  ts.feature_dim = 4;
  for (const auto& r : recs) {
    const BidEntry* b = r.bid_of(producer_id);
    if (b == nullptr) continue;
    ts.add(SurplusFeature{r.load, r.day_type, r.hour, b->bid.price}.vector(),
           r.surplus_of(producer_id));
  }
  if (ts.empty()) throw std::invalid_argument("producer " + producer_id + " absent from history");
  return ts;
}

std::pair<double, double> own_bid_range(const MarketHistory& h, const ProducerId& producer_id,
                                        int window_days) {
  std::optional<std::pair<double, double>> range;
  for (const auto& r : h.window(window_days)) {
    const BidEntry* b = r.bid_of(producer_id);
    if (b == nullptr) continue;
    if (!range) range = std::pair{b->bid.price, b->bid.price};
    range->first = std::min(range->first, b->bid.price);
    range->second = std::max(range->second, b->bid.price);
  }
  if (!range) throw std::invalid_argument("producer " + producer_id + " absent from history");
  return *range;
}

double LearnedModel::predict(std::span<const double> x) const {
  return target_offset + target_scale * svr::predict(svr, x);
}

LearnedModel fit_model(const svr::TrainingSet& ts, const ModelSettings& settings) {
  if (ts.empty()) throw std::invalid_argument("cannot fit a model on an empty training set");
  double lo = ts.samples.front().target;
  double hi = lo;
  for (const auto& s : ts.samples) {
    lo = std::min(lo, s.target);
    hi = std::max(hi, s.target);
  }
  LearnedModel m;
  m.target_offset = lo;
  m.target_scale = hi > lo ? hi - lo : 1.0;

  svr::TrainingSet scaled;
  scaled.feature_dim = ts.feature_dim;
  scaled.samples.reserve(ts.size());
  for (const auto& s : ts.samples) {
    scaled.samples.push_back({s.features, (s.target - m.target_offset) / m.target_scale});
  }

  svr::SvrHyperparams hp = settings.svr;
  if (settings.epsilon_units == EpsilonUnits::target) {
    hp.epsilon = settings.svr.epsilon / m.target_scale;
  } else {
    // The scaled targets span exactly [0, 1] unless the range is degenerate.
    hp.epsilon = hi > lo ? settings.svr.epsilon : 0.0;
  }

  try {
    m.svr = svr::train(scaled, hp);
    m.kkt_residual = svr::kkt_residual(m.svr, scaled, hp);
  } catch (const svr::ConvergenceError& e) {
    m.svr = e.model();
    m.converged = false;
    m.kkt_residual = e.residual();
  }
  return m;
}

double forecast_price(const LearnedModel& m, const PriceFeature& f, double price_cap) {
  return std::clamp(m.predict(f.vector()), 0.0, price_cap);
}

const HourErrorStats& ForecastErrorStats::at(int hour) const {
  if (hour < 0 || hour >= kHoursPerDay) throw std::out_of_range("hour outside [0, 24)");
  return hours[static_cast<std::size_t>(hour)];
}

ForecastErrorStats update_error_stats(std::span<const ForecastObservation> pairs,
                                      int window_days) {
  if (window_days <= 0) throw std::invalid_argument("window_days must be positive");
  ForecastErrorStats stats;
  if (pairs.empty()) return stats;
  int latest = pairs.front().day;
  for (const auto& p : pairs) latest = std::max(latest, p.day);
  const int first_day = latest - window_days + 1;

  std::array<std::vector<double>, kHoursPerDay> errors;
  for (const auto& p : pairs) {
    if (p.day < first_day) continue;
    if (p.hour < 0 || p.hour >= kHoursPerDay) throw std::invalid_argument("hour outside [0, 24)");
    errors[static_cast<std::size_t>(p.hour)].push_back(p.actual - p.forecast);
  }
  for (std::size_t h = 0; h < errors.size(); ++h) {
    const auto& e = errors[h];
    auto& out = stats.hours[h];
    out.sample_count = static_cast<int>(e.size());
    if (e.empty()) continue;
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= static_cast<double>(e.size());
    out.mu = mean;
    if (e.size() >= 2) {
      double ss = 0.0;
      for (double v : e) ss += (v - mean) * (v - mean);
      out.sigma = std::sqrt(ss / static_cast<double>(e.size() - 1));
    }
  }
  return stats;
}

std::vector<ForecastObservation> forecast_observations(const MarketHistory& h,
                                                       const ProducerId& forecaster) {
  std::vector<ForecastObservation> out;
  for (const auto& r : h.records()) {
    auto it = r.forecasts.find(forecaster);
    if (it == r.forecasts.end()) continue;
    out.push_back({r.day, r.hour, it->second, r.result.mcp});
  }
  return out;
}

}  // namespace elmarket::forecast
