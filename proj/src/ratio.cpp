#include "brief/ratio.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <system_error>

namespace brief {
namespace {

__extension__ using wide = __int128;

std::int64_t narrow(wide v) {
  if (v > INT64_MAX || v < INT64_MIN) throw std::overflow_error("ratio overflow");
  return static_cast<std::int64_t>(v);
}

Ratio normalized(wide num, wide den) {
  if (den == 0) throw std::invalid_argument("ratio denominator is zero");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  wide a = num < 0 ? -num : num;
  wide b = den;
  while (b != 0) {
    wide t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  return Ratio(narrow(num), narrow(den));
}

std::int64_t parse_int(std::string_view text, std::string_view whole) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw std::invalid_argument("malformed ratio '" + std::string(whole) + "'");
  return v;
}

}  // namespace

Ratio::Ratio(std::int64_t num, std::int64_t den) {
  if (den <= 0) throw std::invalid_argument("ratio denominator must be positive");
  if (num < 0) throw std::invalid_argument("ratio must be non-negative");
  std::int64_t g = std::gcd(num, den);
  if (g == 0) g = 1;
  num_ = num / g;
  den_ = den / g;
}

Ratio Ratio::parse(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) throw std::invalid_argument("empty ratio");

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    std::int64_t n = parse_int(text.substr(0, slash), text);
    std::int64_t d = parse_int(text.substr(slash + 1), text);
    if (d <= 0 || n < 0) throw std::invalid_argument("malformed ratio '" + std::string(text) + "'");
    return Ratio(n, d);
  }

  std::string_view mantissa = text;
  std::int64_t exponent = 0;
  if (auto e = text.find_first_of("eE"); e != std::string_view::npos) {
    mantissa = text.substr(0, e);
    std::string_view exp_text = text.substr(e + 1);
    if (!exp_text.empty() && exp_text.front() == '+') exp_text.remove_prefix(1);
    exponent = parse_int(exp_text, text);
  }
  if (!mantissa.empty() && mantissa.front() == '+') mantissa.remove_prefix(1);

  std::string digits;
  std::int64_t scale = 0;
  bool seen_point = false;
  for (char c : mantissa) {
    if (c == '.') {
      if (seen_point) throw std::invalid_argument("malformed ratio '" + std::string(text) + "'");
      seen_point = true;
    } else if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_point) ++scale;
    } else {
      throw std::invalid_argument("malformed ratio '" + std::string(text) + "'");
    }
  }
  if (digits.empty()) throw std::invalid_argument("malformed ratio '" + std::string(text) + "'");
  while (digits.size() > 1 && digits.front() == '0') digits.erase(digits.begin());
  if (digits.size() > 18) throw std::invalid_argument("ratio '" + std::string(text) + "' has too many digits");

  wide num = parse_int(digits, text);
  wide den = 1;
  scale -= exponent;
  if (scale > 18 || scale < -18) throw std::invalid_argument("ratio '" + std::string(text) + "' out of range");
  for (; scale > 0; --scale) den *= 10;
  for (; scale < 0; ++scale) num *= 10;
  return normalized(num, den);
}

Ratio Ratio::from_double(double value) {
  if (!std::isfinite(value) || value < 0) throw std::invalid_argument("ratio must be finite and non-negative");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::invalid_argument("cannot format ratio");
  return parse(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

std::int64_t Ratio::ceil_mul(std::int64_t n) const {
  wide p = static_cast<wide>(num_) * n;
  wide q = p / den_;
  if (q * den_ < p) ++q;
  return narrow(q);
}

std::int64_t Ratio::floor_mul(std::int64_t n) const {
  wide p = static_cast<wide>(num_) * n;
  wide q = p / den_;
  if (q * den_ > p) --q;
  return narrow(q);
}

bool Ratio::times_exceeds_one(std::int64_t n) const {
  return static_cast<wide>(num_) * n > static_cast<wide>(den_);
}

std::string Ratio::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Ratio operator+(const Ratio& a, const Ratio& b) {
  return normalized(static_cast<wide>(a.num_) * b.den_ + static_cast<wide>(b.num_) * a.den_,
                    static_cast<wide>(a.den_) * b.den_);
}

Ratio operator-(const Ratio& a, const Ratio& b) {
  wide n = static_cast<wide>(a.num_) * b.den_ - static_cast<wide>(b.num_) * a.den_;
  if (n < 0) throw std::domain_error("negative ratio difference");
  return normalized(n, static_cast<wide>(a.den_) * b.den_);
}

Ratio operator*(const Ratio& a, const Ratio& b) {
  return normalized(static_cast<wide>(a.num_) * b.num_, static_cast<wide>(a.den_) * b.den_);
}

Ratio Ratio::halved() const { return normalized(num_, static_cast<wide>(den_) * 2); }

std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) {
  wide lhs = static_cast<wide>(a.num_) * b.den_;
  wide rhs = static_cast<wide>(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

}  // namespace brief
