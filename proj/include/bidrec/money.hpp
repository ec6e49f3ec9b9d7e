#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace bidrec {

__extension__ typedef __int128 Int128;

/// Exact USD amount held as an integer count of nano-dollars.
///
/// Addition is exact and associative, so aggregate cost sums are identical
/// regardless of summation order or partitioning. The 128-bit backing store
/// holds sums of 10^9 values of 10^3 USD (10^21 nanos) with ample headroom.
/// Inputs with more than nine fractional digits are rounded half-even.
class Money {
 public:
  using Rep = Int128;

  constexpr Money() = default;

  static constexpr Money from_nanos(Rep nanos) { return Money(nanos); }

  /// Rounds to the nearest nano-dollar. Throws std::invalid_argument on NaN/inf.
  static Money from_usd(double usd);

  /// Parses a plain decimal ("0.0025", "-3", "1e-3"). Returns false on malformed text.
  static bool parse(std::string_view text, Money& out);

  [[nodiscard]] constexpr Rep nanos() const { return nanos_; }
  [[nodiscard]] double usd() const;
  [[nodiscard]] constexpr bool negative() const { return nanos_ < 0; }
  [[nodiscard]] constexpr bool zero() const { return nanos_ == 0; }

  /// Exact decimal text with nine fractional digits, e.g. "0.006000000".
  [[nodiscard]] std::string to_string() const;

  constexpr Money& operator+=(Money other) {
    nanos_ += other.nanos_;
    return *this;
  }
  constexpr Money& operator-=(Money other) {
    nanos_ -= other.nanos_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return a += b; }
  friend constexpr Money operator-(Money a, Money b) { return a -= b; }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(Rep nanos) : nanos_(nanos) {}
  Rep nanos_ = 0;
};

inline constexpr Money::Rep kNanosPerUsd = 1'000'000'000;

}  // namespace bidrec
