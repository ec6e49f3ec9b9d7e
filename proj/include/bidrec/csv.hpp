#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bidrec::csv {

/// Buffered RFC-4180 record reader: comma separated, double-quote quoting,
/// doubled quotes inside quoted fields, CRLF or LF line endings, and line
/// breaks inside quoted fields.
class Reader {
 public:
  explicit Reader(std::istream& in, std::size_t buffer_size = 1 << 20);

  /// Reads the next record into `fields`. Returns false at end of input.
  /// A blank line yields a record with a single empty field.
  bool next(std::vector<std::string>& fields);

  /// 1-based index of the record most recently returned by next().
  [[nodiscard]] std::size_t record_number() const { return record_number_; }

 private:
  int get();
  int peek();
  bool fill();

  std::istream& in_;
  std::vector<char> buffer_;
  std::size_t pos_ = 0;
  std::size_t len_ = 0;
  std::size_t record_number_ = 0;
};

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, std::span<const std::string> fields);

/// Shortest decimal text that round-trips to the same double.
std::string format_shortest(double value);

/// Fixed-point text with `decimals` fractional digits, rounding half-even on
/// the shortest round-trip decimal form of `value` (so 1.8815 -> "1.882").
std::string format_fixed_half_even(double value, int decimals);

}  // namespace bidrec::csv
