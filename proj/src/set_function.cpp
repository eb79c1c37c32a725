#include "instashap/set_function.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace instashap {

namespace {

long double BinomialLd(int n, int k) {
  if (k < 0 || k > n) return 0.0L;
  k = std::min(k, n - k);
  long double r = 1.0L;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

WeightTable Normalize(int d, std::vector<long double> raw) {
  long double total = 0.0L;
  for (int s = 0; s <= d; ++s) total += BinomialLd(d, s) * raw[s];
  WeightTable w;
  w.d = d;
  w.normalized = true;
  w.per_subset.resize(d + 1);
  for (int s = 0; s <= d; ++s) {
    w.per_subset[s] = static_cast<double>(raw[s] / total);
  }
  return w;
}

}  // namespace

SetFunctionTable::SetFunctionTable(int d, int c) : d_(d), c_(c) {
  CheckExhaustive(d);
  if (c < 1) throw InvalidArgument("output dimension must be positive");
  values_.assign((std::size_t{1} << d) * static_cast<std::size_t>(c), 0.0);
}

SetFunctionTable SetFunctionTable::FromFunction(
    int d, int c, const std::function<void(FeatureSet, std::span<double>)>& fn) {
  SetFunctionTable table(d, c);
  const std::uint32_t n = 1u << d;
  for (std::uint32_t m = 0; m < n; ++m) fn(FeatureSet(m), table.at(FeatureSet(m)));
  return table;
}

double WeightTable::size_mass(int s) const {
  return static_cast<double>(BinomialLd(d, s)) * per_subset[s];
}

double WeightTable::total() const {
  double t = 0.0;
  for (int s = 0; s <= d; ++s) t += size_mass(s);
  return t;
}

WeightTable ShapUniformWeights(int d) {
  CheckExhaustive(d);
  std::vector<long double> raw(d + 1);
  for (int s = 0; s <= d; ++s) raw[s] = 1.0L / (BinomialLd(d, s) * (d + 1));
  return Normalize(d, std::move(raw));
}

WeightTable ShapKernelWeights(int d) {
  if (d < 2 || d > kMaxExhaustiveFeatures) {
    throw InvalidArgument("Shapley kernel needs 2 <= d <= 25, got " +
                          std::to_string(d));
  }
  std::vector<long double> raw(d + 1, 0.0L);
  for (int s = 1; s < d; ++s) {
    raw[s] = 1.0L / (BinomialLd(d, s) * s * (d - s));
  }
  return Normalize(d, std::move(raw));
}

WeightTable FullMaskWeights(int d) {
  CheckExhaustive(d);
  WeightTable w;
  w.d = d;
  w.normalized = true;
  w.per_subset.assign(d + 1, 0.0);
  w.per_subset[d] = 1.0;
  return w;
}

FeatureSet SampleSubsetOfSize(int d, int size, std::mt19937_64& rng) {
  // Partial Fisher-Yates over the feature indices.
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  std::uint32_t bits = 0;
  for (int j = 0; j < size; ++j) {
    std::uniform_int_distribution<int> pick(j, d - 1);
    std::swap(idx[j], idx[pick(rng)]);
    bits |= 1u << idx[j];
  }
  return FeatureSet(bits);
}

FeatureSet SampleSubset(const WeightTable& weights, std::mt19937_64& rng) {
  std::vector<double> mass(weights.d + 1);
  for (int s = 0; s <= weights.d; ++s) mass[s] = weights.size_mass(s);
  std::discrete_distribution<int> size_dist(mass.begin(), mass.end());
  return SampleSubsetOfSize(weights.d, size_dist(rng), rng);
}

std::vector<double> DiscreteDerivative(const SetFunctionTable& table,
                                       FeatureSet s, FeatureSet t) {
  const int d = table.num_features();
  if (!s.fits(d) || !t.fits(d)) throw InvalidArgument("subset outside [d]");
  std::vector<double> out(table.output_dim(), 0.0);
  const FeatureSet base = t - s;
  const int ssize = s.size();
  ForEachSubset(s, [&](FeatureSet w) {
    const double sign = ((ssize - w.size()) % 2 == 0) ? 1.0 : -1.0;
    const auto v = table.at(base | w);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += sign * v[k];
  });
  return out;
}

PurifiedTable MobiusPurify(const SetFunctionTable& table) {
  const int d = table.num_features();
  const int c = table.output_dim();
  PurifiedTable out(d, c);
  out.raw() = table.raw();
  auto& v = out.raw();
  const std::uint32_t n = 1u << d;
  for (int i = 0; i < d; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t m = 0; m < n; ++m) {
      if ((m & bit) == 0) continue;
      double* dst = v.data() + static_cast<std::size_t>(m) * c;
      const double* src = v.data() + static_cast<std::size_t>(m ^ bit) * c;
      for (int k = 0; k < c; ++k) dst[k] -= src[k];
    }
  }
  return out;
}

SetFunctionTable ZetaTransform(const PurifiedTable& purified) {
  const int d = purified.num_features();
  const int c = purified.output_dim();
  SetFunctionTable out(d, c);
  out.raw() = purified.raw();
  auto& v = out.raw();
  const std::uint32_t n = 1u << d;
  for (int i = 0; i < d; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t m = 0; m < n; ++m) {
      if ((m & bit) == 0) continue;
      double* dst = v.data() + static_cast<std::size_t>(m) * c;
      const double* src = v.data() + static_cast<std::size_t>(m ^ bit) * c;
      for (int k = 0; k < c; ++k) dst[k] += src[k];
    }
  }
  return out;
}

}  // namespace instashap
