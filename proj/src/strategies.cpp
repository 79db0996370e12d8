#include "elmarket/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace elmarket::strategy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// Acklam's rational approximation, relative error about 1e-9 before the
// Halley refinement step.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double clamp_price(double p, double marginal_cost, double price_cap) {
  return std::clamp(p, marginal_cost, std::max(marginal_cost, price_cap));
}

}  // namespace

std::string_view kind_name(const StrategyParams& p) {
  return std::visit(overloaded{
                        [](const Random&) { return std::string_view("random"); },
                        [](const MarginalCost&) { return std::string_view("marginal_cost"); },
                        [](const PriceForecast&) { return std::string_view("price_forecast"); },
                        [](const SurplusForecast&) { return std::string_view("surplus_forecast"); },
                    },
                    p);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile needs p in (0, 1)");
  if (p == 0.5) return 0.0;
  double x = acklam(p);
  // One Halley step against the exact CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

BidDecision bid_marginal_cost(const ProducerTraits& producer) {
  return {producer.marginal_cost, producer.capacity, BidRationale::marginal_cost};
}

BidDecision bid_random(const ProducerTraits& producer, const Random& params, double price_cap,
                       Rng& rng) {
  const double low = params.low.value_or(producer.marginal_cost);
  const double high = params.high.value_or(price_cap);
  double price = low;
  if (high > low) price = std::uniform_real_distribution<double>(low, high)(rng);
  return {price, producer.capacity, BidRationale::random};
}

BidDecision bid_price_forecast(const ProducerTraits& producer, double p_forecast,
                               const forecast::ForecastErrorStats& stats, int hour,
                               double alpha, double price_cap) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const auto& s = stats.at(hour);
  double price = p_forecast + s.mu;
  if (s.usable() && s.sigma > 0.0) price += s.sigma * normal_quantile(1.0 - alpha);

  BidDecision d{price, producer.capacity, BidRationale::alpha_quantile};
  if (price < producer.marginal_cost) {
    d.price = producer.marginal_cost;
    d.rationale = BidRationale::cost_floor;
  }
  d.price = clamp_price(d.price, producer.marginal_cost, price_cap);
  return d;
}

ExplorationOutcome apply_exploration_rule(GridPosition where, double p0, double p_min,
                                          double p_max, const SurplusForecast& params, double u) {
  switch (where) {
    case GridPosition::interior:
      return {p0, BidRationale::grid_argmax};
    case GridPosition::lower_boundary:
      if (u < params.gamma1_pct / 100.0) return {p_min, BidRationale::hold_boundary};
      return {p_min * (1.0 - params.beta1_pct / 100.0), BidRationale::explore_down};
    case GridPosition::upper_boundary:
      if (u < params.gamma2_pct / 100.0) return {p_max, BidRationale::hold_boundary};
      return {p_max * (1.0 + params.beta2_pct / 100.0), BidRationale::explore_up};
  }
  return {p0, BidRationale::grid_argmax};
}

GridArgmax surplus_grid_argmax(const forecast::LearnedModel& surplus_model, double load,
                               DayType day_type, int hour, double p_min, double p_max,
                               int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("grid_points must be at least 2");
  const double step = (p_max - p_min) / static_cast<double>(grid_points - 1);
  forecast::SurplusFeature f{load, day_type, hour, p_min};
  int best_k = 0;
  double best = 0.0;
  for (int k = 0; k < grid_points; ++k) {
    f.bid_price = k == grid_points - 1 ? p_max : p_min + step * k;
    const double s = surplus_model.predict(f.vector());
    if (k == 0 || s > best) {
      best = s;
      best_k = k;
    }
  }
  GridArgmax out;
  out.price = best_k == grid_points - 1 ? p_max : p_min + step * best_k;
  if (best_k == 0) out.where = GridPosition::lower_boundary;
  else if (best_k == grid_points - 1) out.where = GridPosition::upper_boundary;
  return out;
}

BidDecision bid_surplus_forecast(const ProducerTraits& producer,
                                 const forecast::LearnedModel* surplus_model, double load,
                                 DayType day_type, int hour, const SurplusForecast& params,
                                 std::pair<double, double> history_bid_range, double price_cap,
                                 Rng& rng) {
  const auto [p_min, p_max] = history_bid_range;
  if (surplus_model == nullptr || !(p_min < p_max)) return bid_marginal_cost(producer);

  const GridArgmax arg =
      surplus_grid_argmax(*surplus_model, load, day_type, hour, p_min, p_max, params.grid_points);
  double u = 0.0;
  if (arg.where != GridPosition::interior) u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const ExplorationOutcome out = apply_exploration_rule(arg.where, arg.price, p_min, p_max, params, u);
  return {clamp_price(out.price, producer.marginal_cost, price_cap), producer.capacity,
          out.rationale};
}

void validate(const StrategyParams& p, double marginal_cost, double price_cap) {
  std::visit(overloaded{
                 [&](const Random& r) {
                   const double low = r.low.value_or(marginal_cost);
                   const double high = r.high.value_or(price_cap);
                   if (!(marginal_cost <= low && low <= high && high <= price_cap))
                     throw std::invalid_argument(
                         "random strategy needs marginal_cost <= low <= high <= price_cap");
                 },
                 [](const MarginalCost&) {},
                 [](const PriceForecast& f) {
                   if (!(f.alpha > 0.0 && f.alpha < 1.0))
                     throw std::invalid_argument("price_forecast alpha must lie in (0, 1)");
                 },
                 [](const SurplusForecast& s) {
                   if (!(s.beta1_pct >= 0.0 && s.beta2_pct >= 0.0))
                     throw std::invalid_argument("surplus_forecast beta must be nonnegative");
                   if (!(s.gamma1_pct >= 0.0 && s.gamma1_pct <= 100.0 && s.gamma2_pct >= 0.0 &&
                         s.gamma2_pct <= 100.0))
                     throw std::invalid_argument("surplus_forecast gamma must lie in [0, 100]");
                   if (s.grid_points < 2)
                     throw std::invalid_argument("surplus_forecast grid_points must be >= 2");
                 },
             },
             p);
}

}  // namespace elmarket::strategy
