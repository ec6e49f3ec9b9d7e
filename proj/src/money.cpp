#include "bidrec/money.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace bidrec {
namespace {

std::string int128_to_string(Int128 value) {
  if (value == 0) return "0";
  const bool neg = value < 0;
  Int128 mag = neg ? -value : value;
  std::string digits;
  while (mag > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(mag % 10)));
    mag /= 10;
  }
  if (neg) digits.push_back('-');
  return {digits.rbegin(), digits.rend()};
}

Int128 pow10(int k) {
  Int128 r = 1;
  for (int i = 0; i < k; ++i) r *= 10;
  return r;
}

}  // namespace

Money Money::from_usd(double usd) {
  if (!std::isfinite(usd)) throw std::invalid_argument("money must be finite");
  const long double scaled = std::nearbyint(static_cast<long double>(usd) * 1e9L);
  if (std::fabs(scaled) > 1e36L) throw std::invalid_argument("money out of range");
  return Money(static_cast<Int128>(scaled));
}

bool Money::parse(std::string_view text, Money& out) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  std::size_t end = text.size();
  while (end > i && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  if (i == end) return false;

  bool neg = false;
  if (text[i] == '+' || text[i] == '-') {
    neg = text[i] == '-';
    ++i;
  }

  std::string digits;
  int exponent = 0;
  bool seen_digit = false;
  bool seen_dot = false;
  for (; i < end; ++i) {
    const char c = text[i];
    if (c >= '0' && c <= '9') {
      seen_digit = true;
      if (!(digits.empty() && c == '0')) digits.push_back(c);
      if (seen_dot) --exponent;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!seen_digit) return false;

  if (i < end) {
    if (text[i] != 'e' && text[i] != 'E') return false;
    ++i;
    bool exp_neg = false;
    if (i < end && (text[i] == '+' || text[i] == '-')) {
      exp_neg = text[i] == '-';
      ++i;
    }
    if (i == end) return false;
    int e = 0;
    for (; i < end; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      e = e * 10 + (text[i] - '0');
      if (e > 400) return false;
    }
    exponent += exp_neg ? -e : e;
  }

  if (digits.empty()) {
    out = Money();
    return true;
  }
  if (digits.size() > 36) return false;

  Int128 mantissa = 0;
  for (char c : digits) mantissa = mantissa * 10 + (c - '0');

  const int shift = exponent + 9;
  Int128 nanos = 0;
  if (shift >= 0) {
    if (static_cast<int>(digits.size()) + shift > 37) return false;
    nanos = mantissa * pow10(shift);
  } else if (-shift > 37) {
    nanos = 0;
  } else {
    const Int128 divisor = pow10(-shift);
    nanos = mantissa / divisor;
    const Int128 rem = mantissa % divisor;
    const Int128 twice = rem * 2;
    if (twice > divisor || (twice == divisor && (nanos % 2) == 1)) ++nanos;
  }
  out = Money(neg ? -nanos : nanos);
  return true;
}

double Money::usd() const {
  return static_cast<double>(static_cast<long double>(nanos_) / 1e9L);
}

std::string Money::to_string() const {
  const bool neg = nanos_ < 0;
  const Int128 mag = neg ? -nanos_ : nanos_;
  std::string frac = int128_to_string(mag % kNanosPerUsd);
  frac.insert(0, 9 - frac.size(), '0');
  return (neg ? "-" : "") + int128_to_string(mag / kNanosPerUsd) + "." + frac;
}

}  // namespace bidrec
