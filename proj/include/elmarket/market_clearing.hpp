#pragma once

// Uniform-price auction against an inelastic hourly load.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "elmarket/common.hpp"

namespace elmarket::market {

using elmarket::ProducerId;

struct Bid {
  ProducerId producer_id;
  double price = 0.0;     // EUR/MWh
  double quantity = 0.0;  // MWh
};

struct ClearingResult {
  double mcp = 0.0;  // EUR/MWh
  std::map<ProducerId, double> dispatch;
  std::set<ProducerId> marginal_producer_ids;
  bool shortage = false;

  /// Accepted MWh for `id`, zero when the producer did not bid.
  double dispatched(const ProducerId& id) const;
  double total_dispatched() const;
};

/// Merit-order clearing. Bids tied at the marginal price share the residual
/// load pro rata by offered quantity. When the load exceeds the total offer
/// every bid is fully accepted, the price is set to the cap and the result
/// is flagged as a shortage.
ClearingResult clear(std::span<const Bid> bids, double load, double price_cap);

/// Eq. S = p q - C(q) with a constant marginal cost.
double producer_surplus(const ClearingResult& r, const ProducerId& producer_id,
                        double marginal_cost);

}  // namespace elmarket::market
