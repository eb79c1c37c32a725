#pragma once

#include <random>
#include <vector>

#include "instashap/set_function.hpp"

namespace instashap::testing {

// Dense random game with standard normal entries.
inline SetFunctionTable RandomGame(int d, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  SetFunctionTable t(d, c);
  for (double& v : t.raw()) v = normal(rng);
  return t;
}

// u_T(S) = 1 iff T ⊆ S.
inline SetFunctionTable UnanimityGame(int d, FeatureSet t) {
  return SetFunctionTable::FromFunction(d, 1, [t](FeatureSet s, std::span<double> out) {
    out[0] = t.is_subset_of(s) ? 1.0 : 0.0;
  });
}

inline SetFunctionTable AdditiveGame(const std::vector<double>& a) {
  const int d = static_cast<int>(a.size());
  return SetFunctionTable::FromFunction(d, 1, [a](FeatureSet s, std::span<double> out) {
    out[0] = 0.0;
    for (int i : s.indices()) out[0] += a[i];
  });
}

// v'(S) = v(π^{-1}(S)) where feature i of v becomes feature perm[i] of v'.
inline SetFunctionTable RelabelGame(const SetFunctionTable& v, const std::vector<int>& perm) {
  const int d = v.num_features();
  SetFunctionTable out(d, v.output_dim());
  for (std::uint32_t m = 0; m < (1u << d); ++m) {
    std::uint32_t image = 0;
    for (int i : FeatureSet(m).indices()) image |= 1u << perm[i];
    const auto src = v.at(FeatureSet(m));
    std::copy(src.begin(), src.end(), out.at(FeatureSet(image)).begin());
  }
  return out;
}

}  // namespace instashap::testing
