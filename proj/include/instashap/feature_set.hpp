#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace instashap {

// Largest feature count for which powerset tables are materialized.
inline constexpr int kMaxExhaustiveFeatures = 25;

// Thrown for malformed arguments across the library (bad dimensions, out of
// range hyperparameters, invalid subsets).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a numerical procedure cannot produce a meaningful answer
// (non-finite loss, singular system, zero variance).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A subset of [d] stored as a bitmask; bit i set means feature i (0-based) is
// present. The feature count is carried by the owning context.
class FeatureSet {
 public:
  constexpr FeatureSet() = default;
  constexpr explicit FeatureSet(std::uint32_t bits) : bits_(bits) {}

  static constexpr FeatureSet Empty() { return FeatureSet(0); }
  static constexpr FeatureSet Full(int d) {
    return FeatureSet(d >= 32 ? ~0u : ((1u << d) - 1u));
  }
  static constexpr FeatureSet Singleton(int i) { return FeatureSet(1u << i); }
  static FeatureSet FromIndices(const std::vector<int>& indices) {
    std::uint32_t bits = 0;
    for (int i : indices) {
      if (i < 0 || i >= 32) throw InvalidArgument("feature index out of range");
      bits |= 1u << i;
    }
    return FeatureSet(bits);
  }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(int i) const { return (bits_ >> i) & 1u; }
  constexpr bool is_subset_of(FeatureSet other) const {
    return (bits_ & ~other.bits_) == 0;
  }
  constexpr bool fits(int d) const { return is_subset_of(Full(d)); }

  constexpr FeatureSet with(int i) const { return FeatureSet(bits_ | (1u << i)); }
  constexpr FeatureSet without(int i) const {
    return FeatureSet(bits_ & ~(1u << i));
  }
  constexpr FeatureSet operator|(FeatureSet o) const {
    return FeatureSet(bits_ | o.bits_);
  }
  constexpr FeatureSet operator&(FeatureSet o) const {
    return FeatureSet(bits_ & o.bits_);
  }
  constexpr FeatureSet operator-(FeatureSet o) const {
    return FeatureSet(bits_ & ~o.bits_);
  }
  constexpr auto operator<=>(const FeatureSet&) const = default;

  std::vector<int> indices() const {
    std::vector<int> out;
    out.reserve(size());
    for (std::uint32_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(std::countr_zero(b));
    }
    return out;
  }

  // Complement within [d].
  constexpr FeatureSet complement(int d) const { return Full(d) - *this; }

  // "{1,3}" with 1-based feature numbers, matching user-facing naming.
  std::string ToString() const {
    std::string s = "{";
    bool first = true;
    for (int i : indices()) {
      if (!first) s += ",";
      s += std::to_string(i + 1);
      first = false;
    }
    return s + "}";
  }

 private:
  std::uint32_t bits_ = 0;
};

// Calls fn(FeatureSet) for every subset of `mask`, including the empty set and
// `mask` itself, in increasing bitmask order.
template <typename Fn>
void ForEachSubset(FeatureSet mask, Fn&& fn) {
  const std::uint32_t m = mask.bits();
  std::uint32_t sub = 0;
  while (true) {
    fn(FeatureSet(sub));
    if (sub == m) break;
    sub = (sub - m) & m;
  }
}

inline void CheckExhaustive(int d) {
  if (d < 1 || d > kMaxExhaustiveFeatures) {
    throw InvalidArgument("feature count " + std::to_string(d) +
                          " outside exhaustive range [1, 25]");
  }
}

}  // namespace instashap
