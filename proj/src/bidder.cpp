#include "bidrec/bidder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bidrec/errors.hpp"

namespace bidrec::bidder {

void BidPolicy::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(target_cpc_usd) || target_cpc_usd <= 0) throw ConfigError("target_cpc must be positive");
  if (!finite(optimization_fraction) || optimization_fraction <= 0 || optimization_fraction > 1) {
    throw ConfigError("optimization_fraction must be in (0, 1]");
  }
  if (!finite(min_bid_cpm_usd) || !finite(max_bid_cpm_usd) || min_bid_cpm_usd < 0 || max_bid_cpm_usd <= 0) {
    throw ConfigError("bid clamps must be finite, min >= 0 and max > 0");
  }
  if (!(min_bid_cpm_usd < max_bid_cpm_usd)) throw ConfigError("min_bid_cpm must be below max_bid_cpm");
}

double max_bid_cpm(const BidPolicy& policy, double adjusted_ctr) {
  if (!(adjusted_ctr >= 0.0 && adjusted_ctr <= 1.0)) throw std::invalid_argument("adjusted_ctr must be in [0, 1]");
  const double raw = policy.target_cpc_usd * adjusted_ctr * 1000.0 * policy.optimization_fraction;
  return std::clamp(raw, policy.min_bid_cpm_usd, policy.max_bid_cpm_usd);
}

double expected_cpc(double bid_cpm_usd, double adjusted_ctr) {
  if (!(adjusted_ctr > 0.0)) throw NoClickSignal();
  return bid_cpm_usd / (adjusted_ctr * 1000.0);
}

}  // namespace bidrec::bidder
