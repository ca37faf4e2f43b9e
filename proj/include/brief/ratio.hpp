#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace brief {

/// Exact non-negative fraction used for every width multiplier (k, alpha,
/// beta). Widths are computed as ceil(ratio * n) in integer arithmetic, so
/// 0.7 * 10 is exactly 7 and never rounds up to 8.
class Ratio {
 public:
  constexpr Ratio() = default;
  Ratio(std::int64_t num, std::int64_t den);
  explicit Ratio(std::int64_t whole) : Ratio(whole, 1) {}

  /// Accepts "11/16", "0.7", "1", "1e-2" style decimals.
  static Ratio parse(std::string_view text);
  /// Uses the shortest decimal representation that round-trips the double,
  /// so from_double(0.7) == 7/10.
  static Ratio from_double(double value);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// ceil(num/den * n)
  std::int64_t ceil_mul(std::int64_t n) const;
  /// floor(num/den * n)
  std::int64_t floor_mul(std::int64_t n) const;

  /// True when (this * n) > 1, compared exactly.
  bool times_exceeds_one(std::int64_t n) const;

  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }

  /// "11/16", or "3" for integers.
  std::string str() const;

  friend Ratio operator+(const Ratio& a, const Ratio& b);
  friend Ratio operator-(const Ratio& a, const Ratio& b);
  friend Ratio operator*(const Ratio& a, const Ratio& b);
  Ratio halved() const;

  friend bool operator==(const Ratio& a, const Ratio& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Midpoint (a + b) / 2, exact.
inline Ratio midpoint(const Ratio& a, const Ratio& b) { return (a + b).halved(); }

}  // namespace brief
