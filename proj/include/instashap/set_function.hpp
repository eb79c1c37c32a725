#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "instashap/feature_set.hpp"

namespace instashap {

// Dense powerset table: one output vector of length c per subset of [d],
// indexed by bitmask.
class SetFunctionTable {
 public:
  SetFunctionTable() = default;
  SetFunctionTable(int d, int c);

  // Evaluates fn(S, out) for every S in the powerset.
  static SetFunctionTable FromFunction(
      int d, int c,
      const std::function<void(FeatureSet, std::span<double>)>& fn);

  int num_features() const { return d_; }
  int output_dim() const { return c_; }
  std::size_t num_subsets() const { return std::size_t{1} << d_; }

  std::span<double> at(FeatureSet s) {
    return {values_.data() + static_cast<std::size_t>(s.bits()) * c_,
            static_cast<std::size_t>(c_)};
  }
  std::span<const double> at(FeatureSet s) const {
    return {values_.data() + static_cast<std::size_t>(s.bits()) * c_,
            static_cast<std::size_t>(c_)};
  }
  // Scalar accessor for c == 1 (or output 0).
  double value(FeatureSet s, int out = 0) const {
    return values_[static_cast<std::size_t>(s.bits()) * c_ + out];
  }

  std::vector<double>& raw() { return values_; }
  const std::vector<double>& raw() const { return values_; }

 private:
  int d_ = 0;
  int c_ = 0;
  std::vector<double> values_;
};

// Möbius coefficients f~(S) of a set function; same layout as the source
// table, kept as a distinct type so the two cannot be confused.
class PurifiedTable : public SetFunctionTable {
 public:
  using SetFunctionTable::SetFunctionTable;
};

// Subset weights that depend only on |S|. `per_subset[s]` is the weight of
// each individual subset of size s; sizes outside the support carry 0.
struct WeightTable {
  int d = 0;
  std::vector<double> per_subset;
  bool normalized = false;

  double weight(FeatureSet s) const { return per_subset[s.size()]; }
  // Total mass on subsets of size s: C(d, s) * per_subset[s].
  double size_mass(int s) const;
  double total() const;
};

// p(S) proportional to C(d,s)^{-1} / (d+1) over all 2^d subsets.
WeightTable ShapUniformWeights(int d);

// p(S) proportional to C(d,s)^{-1} / (s (d-s)) over proper non-empty subsets;
// s = 0 and s = d carry zero weight.
WeightTable ShapKernelWeights(int d);

// Point mass on S = [d].
WeightTable FullMaskWeights(int d);

// Draws a subset: first a size from the table's size masses, then a uniform
// subset of that size.
FeatureSet SampleSubset(const WeightTable& weights, std::mt19937_64& rng);

// Uniform random subset of [d] with exactly `size` elements.
FeatureSet SampleSubsetOfSize(int d, int size, std::mt19937_64& rng);

// sum_{W subset of S} (-1)^{|S|-|W|} f((T - S) + W).
std::vector<double> DiscreteDerivative(const SetFunctionTable& table,
                                       FeatureSet s, FeatureSet t);

// f~(S) = sum_{W subset of S} (-1)^{|S|-|W|} f(W) for all S (fast transform).
PurifiedTable MobiusPurify(const SetFunctionTable& table);

// Inverse of MobiusPurify: f(S) = sum_{T subset of S} f~(T).
SetFunctionTable ZetaTransform(const PurifiedTable& purified);

}  // namespace instashap
