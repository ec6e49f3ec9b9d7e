#pragma once

namespace bidrec::bidder {

/// Per-campaign bidding knobs. The clamps are floor and ceiling for any
/// recommended CPM; upstream servers reject bids outside them.
struct BidPolicy {
  double target_cpc_usd = 1.0;
  double optimization_fraction = 0.9;
  double min_bid_cpm_usd = 0.01;
  double max_bid_cpm_usd = 20.0;

  /// Throws ConfigError unless target > 0, fraction in (0, 1], 0 <= min < max.
  void validate() const;
};

/// Highest CPM whose expected CPC stays at target * fraction:
/// clamp(target_cpc * ctr * 1000 * fraction, min, max).
double max_bid_cpm(const BidPolicy& policy, double adjusted_ctr);

/// CPC implied by paying `bid_cpm` at click rate `adjusted_ctr`.
/// Throws NoClickSignal when the rate is zero.
double expected_cpc(double bid_cpm_usd, double adjusted_ctr);

}  // namespace bidrec::bidder
