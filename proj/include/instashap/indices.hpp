#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "instashap/feature_set.hpp"
#include "instashap/masking.hpp"
#include "instashap/rational.hpp"
#include "instashap/set_function.hpp"

namespace instashap {

enum class IndexFamily {
  kShapley,
  kFaith,
  kSII,
  kTaylor,
  kNShapley,
  kArchipelago,
};

std::string ToString(IndexFamily family);
// Accepts shapley|faith|sii|taylor|nshap|archipelago.
IndexFamily ParseIndexFamily(const std::string& name);

// Attributions keyed by subset bitmask; each value has one entry per model
// output. `base_value` holds f(x, ∅) for families that pin the empty set.
struct AttributionResult {
  IndexFamily family = IndexFamily::kShapley;
  int k = 1;
  int d = 0;
  int c = 1;
  std::map<std::uint32_t, std::vector<double>> values;
  std::map<std::uint32_t, std::vector<double>> standard_errors;
  std::vector<double> base_value;
  std::vector<double> point;
  // Sum of attributions minus f(x,[d]) - f(x,∅); empty when not applicable.
  std::vector<double> efficiency_residual;
  std::map<std::string, std::string> metadata;

  double value(FeatureSet s, int out = 0) const;
  // Singleton attributions φ_1..φ_d for one output.
  std::vector<double> PerFeature(int out = 0) const;
};

// Eq.-style definition: sum over S of p(S) [f(S+i) - f(S-i)] with the
// Shapley-uniform distribution.
AttributionResult ShapleyExact(const SetFunctionTable& table);
AttributionResult ShapleyExact(const MaskedFunction& f, std::span<const double> x);

// Averages marginal contributions over random orderings. When m >= d! and
// d <= 10 every ordering is enumerated once instead.
AttributionResult ShapleyPermutation(const MaskedFunction& f, std::span<const double> x,
                                     long m, std::uint64_t seed);

// φ_i = Σ_{S ∋ i} f~_S / |S|.
AttributionResult ShapleyFromPurified(const PurifiedTable& purified);

// Shapley-kernel weighted least squares over all proper subsets with the
// intercept pinned to f(∅) and efficiency imposed as a constraint.
AttributionResult KernelShapLs(const SetFunctionTable& table);
AttributionResult KernelShapLs(const MaskedFunction& f, std::span<const double> x);

// Order-k faithful interaction index: kernel-weighted least squares over the
// basis {1(T ⊆ S)}_{1 ≤ |T| ≤ k} with the same endpoint constraints. Throws
// NumericalError if the normal equations are rank deficient.
AttributionResult FaithShapExact(const SetFunctionTable& table, int k);
AttributionResult FaithShapExact(const MaskedFunction& f, std::span<const double> x,
                                 int k);

// Weight given to a purified effect of size t when forming an index of size s
// at order k. Returns 0 for t < s. Throws for s < 1, s > k or t < 1.
Rational IndexCoefficient(IndexFamily family, int s, int t, int k);

// φ_S = Σ_{T ⊇ S} coefficient(|S|, |T|, k) f~_T for 1 ≤ |S| ≤ k.
AttributionResult MobiusToIndex(const PurifiedTable& purified, IndexFamily family,
                                int k);

struct SimpleIndices {
  std::vector<double> inclusion;    // δ_S f at ∅
  std::vector<double> removal;      // δ_S f at [d]
  std::vector<double> archipelago;  // mean of the two
};

SimpleIndices ComputeSimpleIndices(const SetFunctionTable& table, FeatureSet s);
// Evaluates only the 2^{|S|+1} subsets needed.
SimpleIndices ComputeSimpleIndices(const MaskedFunction& f, std::span<const double> x,
                                   FeatureSet s);

}  // namespace instashap
