#include "bidrec/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <system_error>

namespace bidrec::csv {

Reader::Reader(std::istream& in, std::size_t buffer_size) : in_(in), buffer_(buffer_size) {}

bool Reader::fill() {
  if (!in_) return false;
  in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  len_ = static_cast<std::size_t>(in_.gcount());
  pos_ = 0;
  return len_ > 0;
}

int Reader::peek() {
  if (pos_ == len_ && !fill()) return -1;
  return static_cast<unsigned char>(buffer_[pos_]);
}

int Reader::get() {
  const int c = peek();
  if (c >= 0) ++pos_;
  return c;
}

bool Reader::next(std::vector<std::string>& fields) {
  fields.clear();
  if (peek() < 0) return false;

  std::string field;
  bool quoted = false;
  for (;;) {
    int c = get();
    if (quoted) {
      if (c < 0) break;  // unterminated quote: take what we have
      if (c == '"') {
        if (peek() == '"') {
          get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
      continue;
    }
    if (c < 0 || c == '\n') break;
    if (c == '\r') {
      if (peek() == '\n') get();
      break;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else {
      field.push_back(static_cast<char>(c));
    }
  }
  fields.push_back(std::move(field));
  ++record_number_;
  return true;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

std::string format_shortest(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  if (res.ec != std::errc()) throw std::runtime_error("format_shortest failed");
  return {buf, res.ptr};
}

std::string format_fixed_half_even(double value, int decimals) {
  if (!std::isfinite(value)) throw std::invalid_argument("cannot format non-finite value");
  if (decimals < 0) throw std::invalid_argument("decimals must be non-negative");

  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  if (res.ec != std::errc()) throw std::runtime_error("format_fixed_half_even failed");
  std::string text(buf, res.ptr);

  const bool neg = !text.empty() && text[0] == '-';
  if (neg) text.erase(0, 1);
  const auto dot = text.find('.');
  std::string int_part = dot == std::string::npos ? text : text.substr(0, dot);
  std::string frac = dot == std::string::npos ? std::string() : text.substr(dot + 1);

  bool round_up = false;
  if (static_cast<int>(frac.size()) > decimals) {
    const std::string_view tail = std::string_view(frac).substr(static_cast<std::size_t>(decimals));
    const char first = tail[0];
    const bool rest_nonzero = tail.substr(1).find_first_not_of('0') != std::string_view::npos;
    if (first > '5' || (first == '5' && rest_nonzero)) {
      round_up = true;
    } else if (first == '5') {
      const char last_kept = decimals > 0 ? frac[static_cast<std::size_t>(decimals) - 1] : int_part.back();
      round_up = ((last_kept - '0') % 2) == 1;
    }
    frac.resize(static_cast<std::size_t>(decimals));
  } else {
    frac.append(static_cast<std::size_t>(decimals) - frac.size(), '0');
  }

  std::string digits = int_part + frac;
  if (round_up) {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0 && digits[static_cast<std::size_t>(i)] == '9') {
      digits[static_cast<std::size_t>(i)] = '0';
      --i;
    }
    if (i < 0) {
      digits.insert(digits.begin(), '1');
    } else {
      ++digits[static_cast<std::size_t>(i)];
    }
  }

  const std::size_t int_len = digits.size() - static_cast<std::size_t>(decimals);
  std::string out = digits.substr(0, int_len);
  if (decimals > 0) out += "." + digits.substr(int_len);
  if (neg && out.find_first_not_of("0.") != std::string::npos) out.insert(0, "-");
  return out;
}

}  // namespace bidrec::csv
