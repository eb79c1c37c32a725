#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include "instashap/feature_set.hpp"

namespace instashap {

// Exact fraction with 128-bit numerator/denominator, always reduced and with a
// positive denominator. Sufficient for the interaction-index coefficient tables
// (binomials up to roughly C(60, 30)).
class Rational {
 public:
  using Int = __int128;

  constexpr Rational() = default;
  Rational(Int num, Int den = 1) : num_(num), den_(den) {
    if (den_ == 0) throw NumericalError("rational with zero denominator");
    Normalize();
  }

  Int num() const { return num_; }
  Int den() const { return den_; }
  double ToDouble() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  Rational operator+(const Rational& o) const {
    return Rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
  }
  Rational operator-(const Rational& o) const {
    return Rational(num_ * o.den_ - o.num_ * den_, den_ * o.den_);
  }
  Rational operator*(const Rational& o) const {
    return Rational(num_ * o.num_, den_ * o.den_);
  }
  Rational operator/(const Rational& o) const {
    return Rational(num_ * o.den_, den_ * o.num_);
  }
  Rational operator-() const { return Rational(-num_, den_); }
  bool operator==(const Rational& o) const {
    return num_ == o.num_ && den_ == o.den_;
  }

  std::string ToString() const {
    std::string s = IntToString(num_);
    if (den_ != 1) s += "/" + IntToString(den_);
    return s;
  }

  // Parses "p/q" or "p".
  static Rational Parse(const std::string& text) {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return Rational(std::stoll(text));
    return Rational(std::stoll(text.substr(0, slash)),
                    std::stoll(text.substr(slash + 1)));
  }

 private:
  static Int Abs(Int v) { return v < 0 ? -v : v; }
  static Int Gcd(Int a, Int b) {
    a = Abs(a);
    b = Abs(b);
    while (b != 0) {
      const Int t = a % b;
      a = b;
      b = t;
    }
    return a;
  }
  static std::string IntToString(Int v) {
    if (v == 0) return "0";
    const bool neg = v < 0;
    std::string digits;
    for (Int a = Abs(v); a > 0; a /= 10) {
      digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(a % 10)));
    }
    return neg ? "-" + digits : digits;
  }
  void Normalize() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const Int g = Gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
    if (num_ == 0) den_ = 1;
  }

  Int num_ = 0;
  Int den_ = 1;
};

inline std::ostream& operator<<(std::ostream& os, const Rational& r) {
  return os << r.ToString();
}

// Exact binomial coefficient; zero outside 0 <= k <= n.
inline Rational::Int Binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  Rational::Int result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
  }
  return result;
}

}  // namespace instashap
