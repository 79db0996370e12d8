#pragma once

// Breakpoint enumeration for the stepwise supply curve: for every distinct
// bid price p, S(p) is the quantity offered at or below p. The clearing
// price is the smallest p with S(p) >= load.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "elmarket/market_clearing.hpp"

namespace oracle {

struct ClearingOracleResult {
  double mcp = 0.0;
  bool shortage = false;
  std::map<std::string, double> dispatch;
};

inline ClearingOracleResult brute_force_clear(const std::vector<elmarket::market::Bid>& bids,
                                              double load, double cap) {
  ClearingOracleResult out;
  std::set<double> prices;
  double total = 0.0;
  for (const auto& b : bids) {
    prices.insert(b.price);
    total += b.quantity;
    out.dispatch[b.producer_id] = 0.0;
  }
  if (total < load || bids.empty()) {
    out.shortage = load > 0.0;
    out.mcp = out.shortage ? cap : 0.0;
    for (const auto& b : bids) out.dispatch[b.producer_id] += b.quantity;
    return out;
  }
  for (double p : prices) {
    double at_or_below = 0.0, below = 0.0, at = 0.0;
    for (const auto& b : bids) {
      if (b.price <= p) at_or_below += b.quantity;
      if (b.price < p) below += b.quantity;
      if (b.price == p) at += b.quantity;
    }
    if (at_or_below >= load || p == *prices.rbegin()) {
      out.mcp = p;
      const double residual = std::min(load - below, at);
      for (const auto& b : bids) {
        if (b.price < p) out.dispatch[b.producer_id] += b.quantity;
        else if (b.price == p && at > 0.0) out.dispatch[b.producer_id] += b.quantity * residual / at;
      }
      return out;
    }
  }
  return out;
}

}  // namespace oracle
