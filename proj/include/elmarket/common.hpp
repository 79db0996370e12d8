#pragma once

#include <string>
#include <string_view>

namespace elmarket {

using ProducerId = std::string;

enum class DayType { Weekday = 0, Weekend = 1 };

enum class BidRationale {
  random,
  marginal_cost,
  alpha_quantile,
  cost_floor,
  grid_argmax,
  explore_down,
  explore_up,
  hold_boundary,
};

std::string_view to_string(BidRationale r);

inline constexpr int kHoursPerDay = 24;

}  // namespace elmarket
