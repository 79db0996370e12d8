#include "elmarket/market_clearing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace elmarket::market {

double ClearingResult::dispatched(const ProducerId& id) const {
  auto it = dispatch.find(id);
  return it == dispatch.end() ? 0.0 : it->second;
}

double ClearingResult::total_dispatched() const {
  double total = 0.0;
  for (const auto& [id, q] : dispatch) total += q;
  return total;
}

ClearingResult clear(std::span<const Bid> bids, double load, double price_cap) {
  if (!(load >= 0.0) || !std::isfinite(load)) throw std::invalid_argument("load must be nonnegative");
  for (const auto& b : bids) {
    if (!(b.quantity >= 0.0) || !std::isfinite(b.price))
      throw std::invalid_argument("bid from " + b.producer_id + " is malformed");
  }

  ClearingResult r;
  for (const auto& b : bids) r.dispatch[b.producer_id] = 0.0;

  const double offered = std::accumulate(bids.begin(), bids.end(), 0.0,
                                         [](double s, const Bid& b) { return s + b.quantity; });
  if (bids.empty()) {
    r.shortage = load > 0.0;
    r.mcp = r.shortage ? price_cap : 0.0;
    return r;
  }
  if (offered < load) {
    for (const auto& b : bids) r.dispatch[b.producer_id] += b.quantity;
    r.mcp = price_cap;
    r.shortage = true;
    return r;
  }

  std::vector<const Bid*> order;
  order.reserve(bids.size());
  for (const auto& b : bids) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(),
                   [](const Bid* a, const Bid* b) { return a->price < b->price; });

  double served = 0.0;
  std::size_t g = 0;
  while (g < order.size()) {
    std::size_t end = g;
    double group_qty = 0.0;
    while (end < order.size() && order[end]->price == order[g]->price) {
      group_qty += order[end]->quantity;
      ++end;
    }
    if (served + group_qty >= load || end == order.size()) {
      const double residual = load - served;
      r.mcp = order[g]->price;
      for (std::size_t k = g; k < end; ++k) {
        const Bid& b = *order[k];
        double q = 0.0;
        if (residual >= group_qty) q = b.quantity;
        else if (group_qty > 0.0) q = b.quantity * (residual / group_qty);
        r.dispatch[b.producer_id] += q;
        r.marginal_producer_ids.insert(b.producer_id);
      }
      return r;
    }
    for (std::size_t k = g; k < end; ++k) r.dispatch[order[k]->producer_id] += order[k]->quantity;
    served += group_qty;
    g = end;
  }
  return r;
}

double producer_surplus(const ClearingResult& r, const ProducerId& producer_id,
                        double marginal_cost) {
  const double q = r.dispatched(producer_id);
  return (r.mcp - marginal_cost) * q;
}

}  // namespace elmarket::market
