#pragma once

// Bidding behaviours. Every strategy offers the producer's full capacity and
// returns a price in [marginal_cost, price_cap].

#include <optional>
#include <random>
#include <utility>
#include <variant>

#include "elmarket/common.hpp"
#include "elmarket/forecasting.hpp"

namespace elmarket::strategy {

struct Random {
  // Unset bounds default to [marginal_cost, price_cap].
  std::optional<double> low;
  std::optional<double> high;
};

struct MarginalCost {};

struct PriceForecast {
  double alpha = 0.95;  // target acceptance probability P(p_t >= p_b)
};

struct SurplusForecast {
  double beta1_pct = 5.0;
  double beta2_pct = 5.0;
  double gamma1_pct = 80.0;
  double gamma2_pct = 80.0;
  int grid_points = 200;
};

using StrategyParams = std::variant<Random, MarginalCost, PriceForecast, SurplusForecast>;

std::string_view kind_name(const StrategyParams& p);

struct ProducerTraits {
  ProducerId id;
  double marginal_cost = 0.0;
  double capacity = 0.0;
};

struct BidDecision {
  double price = 0.0;
  double quantity = 0.0;
  BidRationale rationale = BidRationale::marginal_cost;
};

using Rng = std::mt19937_64;

/// Inverse standard normal CDF, |error| < 1e-9 on (0, 1).
double normal_quantile(double p);

/// Standard normal CDF.
double normal_cdf(double z);

BidDecision bid_marginal_cost(const ProducerTraits& producer);

BidDecision bid_random(const ProducerTraits& producer, const Random& params, double price_cap,
                       Rng& rng);

/// Price with acceptance probability alpha when p_t = forecast + e,
/// e ~ N(mu_t, sigma_t^2), floored at the marginal cost. Unusable or
/// degenerate error statistics fall back to max(forecast + mu_t, MC).
BidDecision bid_price_forecast(const ProducerTraits& producer, double p_forecast,
                               const forecast::ForecastErrorStats& stats, int hour,
                               double alpha, double price_cap);

enum class GridPosition { lower_boundary, interior, upper_boundary };

struct ExplorationOutcome {
  double price = 0.0;  // before clamping to [MC, cap]
  BidRationale rationale = BidRationale::grid_argmax;
};

/// Boundary exploration given where the surplus argmax landed. `u` is a
/// uniform draw on [0, 1) and is only consulted at a boundary.
ExplorationOutcome apply_exploration_rule(GridPosition where, double p0, double p_min,
                                          double p_max, const SurplusForecast& params, double u);

struct GridArgmax {
  double price = 0.0;
  GridPosition where = GridPosition::interior;
};

/// Evaluates the surplus model on `grid_points` evenly spaced prices and
/// returns the best one, lowest price on ties.
GridArgmax surplus_grid_argmax(const forecast::LearnedModel& surplus_model, double load,
                               DayType day_type, int hour, double p_min, double p_max,
                               int grid_points);

/// Without a model or with a degenerate price range this falls back to a
/// marginal-cost bid.
BidDecision bid_surplus_forecast(const ProducerTraits& producer,
                                 const forecast::LearnedModel* surplus_model, double load,
                                 DayType day_type, int hour, const SurplusForecast& params,
                                 std::pair<double, double> history_bid_range, double price_cap,
                                 Rng& rng);

void validate(const StrategyParams& p, double marginal_cost, double price_cap);

}  // namespace elmarket::strategy
