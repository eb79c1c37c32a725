#include "instashap/indices.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace instashap {

std::string ToString(IndexFamily family) {
  switch (family) {
    case IndexFamily::kShapley: return "shapley";
    case IndexFamily::kFaith: return "faith";
    case IndexFamily::kSII: return "sii";
    case IndexFamily::kTaylor: return "taylor";
    case IndexFamily::kNShapley: return "nshap";
    case IndexFamily::kArchipelago: return "archipelago";
  }
  return "unknown";
}

IndexFamily ParseIndexFamily(const std::string& name) {
  if (name == "shapley") return IndexFamily::kShapley;
  if (name == "faith") return IndexFamily::kFaith;
  if (name == "sii") return IndexFamily::kSII;
  if (name == "taylor") return IndexFamily::kTaylor;
  if (name == "nshap" || name == "nshapley") return IndexFamily::kNShapley;
  if (name == "archipelago") return IndexFamily::kArchipelago;
  throw InvalidArgument("unknown index family '" + name +
                        "' (expected shapley|faith|sii|taylor|nshap|archipelago)");
}

double AttributionResult::value(FeatureSet s, int out) const {
  const auto it = values.find(s.bits());
  if (it == values.end()) return 0.0;
  return it->second.at(static_cast<std::size_t>(out));
}

std::vector<double> AttributionResult::PerFeature(int out) const {
  std::vector<double> phi(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < d; ++i) phi[i] = value(FeatureSet::Singleton(i), out);
  return phi;
}

namespace {

AttributionResult NewResult(IndexFamily family, int k, int d, int c) {
  AttributionResult r;
  r.family = family;
  r.k = k;
  r.d = d;
  r.c = c;
  return r;
}

void FillEfficiency(AttributionResult& r, std::span<const double> full,
                    std::span<const double> empty) {
  r.efficiency_residual.assign(static_cast<std::size_t>(r.c), 0.0);
  for (int o = 0; o < r.c; ++o) {
    double sum = 0.0;
    for (const auto& [mask, v] : r.values) sum += v[o];
    r.efficiency_residual[o] = sum - (full[o] - empty[o]);
  }
}

void FillEfficiency(AttributionResult& r, const SetFunctionTable& table) {
  const int d = table.num_features();
  FillEfficiency(r, table.at(FeatureSet::Full(d)), table.at(FeatureSet::Empty()));
}

void SetPoint(AttributionResult& r, std::span<const double> x) {
  r.point.assign(x.begin(), x.end());
}

// Bernoulli numbers with B_1 = -1/2.
Rational Bernoulli(int n) {
  std::vector<Rational> b(static_cast<std::size_t>(n + 1));
  b[0] = Rational(1);
  for (int m = 1; m <= n; ++m) {
    Rational acc(0);
    for (int j = 0; j < m; ++j) acc = acc + Rational(Binomial(m + 1, j)) * b[j];
    b[m] = -acc / Rational(m + 1);
  }
  return b[n];
}

void SolveConstrained(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs,
                      const std::vector<double>& total, Eigen::MatrixXd* solution) {
  // [G 1; 1^T 0] [phi; lambda] = [b; total].
  const auto n = gram.rows();
  const auto c = rhs.cols();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = gram;
  kkt.block(0, n, n, 1).setOnes();
  kkt.block(n, 0, 1, n).setOnes();
  Eigen::MatrixXd b(n + 1, c);
  b.topRows(n) = rhs;
  for (Eigen::Index o = 0; o < c; ++o) b(n, o) = total[static_cast<std::size_t>(o)];
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw NumericalError("rank-deficient normal equations (rcond " +
                         std::to_string(rcond) + ")");
  }
  // Kernel weights span many orders of magnitude, so refine with residuals
  // accumulated in extended precision.
  Eigen::MatrixXd x = lu.solve(b);
  using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LongMatrix kkt_l = kkt.cast<long double>();
  const LongMatrix b_l = b.cast<long double>();
  for (int iter = 0; iter < 3; ++iter) {
    const Eigen::MatrixXd residual = (b_l - kkt_l * x.cast<long double>()).cast<double>();
    x += lu.solve(residual);
  }
  *solution = x.topRows(n);
}

}  // namespace

AttributionResult ShapleyExact(const SetFunctionTable& table) {
  const int d = table.num_features();
  const int c = table.output_dim();
  const WeightTable w = ShapUniformWeights(d);
  AttributionResult r = NewResult(IndexFamily::kShapley, 1, d, c);
  const std::uint32_t n = 1u << d;
  for (int i = 0; i < d; ++i) {
    std::vector<double> phi(static_cast<std::size_t>(c), 0.0);
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t m = 0; m < n; ++m) {
      const double p = w.per_subset[std::popcount(m)];
      const auto with = table.at(FeatureSet(m | bit));
      const auto without = table.at(FeatureSet(m & ~bit));
      for (int o = 0; o < c; ++o) phi[o] += p * (with[o] - without[o]);
    }
    r.values[bit] = std::move(phi);
  }
  const auto empty = table.at(FeatureSet::Empty());
  r.base_value.assign(empty.begin(), empty.end());
  FillEfficiency(r, table);
  r.metadata["method"] = "exact-enumeration";
  return r;
}

AttributionResult ShapleyExact(const MaskedFunction& f, std::span<const double> x) {
  AttributionResult r = ShapleyExact(f.Table(x));
  SetPoint(r, x);
  return r;
}

AttributionResult ShapleyPermutation(const MaskedFunction& f,
                                     std::span<const double> x, long m,
                                     std::uint64_t seed) {
  const int d = f.num_features();
  const int c = f.output_dim();
  if (m < 1) throw InvalidArgument("permutation count must be >= 1");
  if (static_cast<int>(x.size()) != d) throw InvalidArgument("x dimension mismatch");

  long factorial = 1;
  for (int i = 2; i <= d && factorial <= m; ++i) factorial *= i;
  const bool enumerate = d <= 10 && m >= factorial;

  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  RowMatrix xs(d + 1, d);
  for (int j = 0; j <= d; ++j) std::copy(x.begin(), x.end(), Row(xs, j).begin());
  std::vector<FeatureSet> masks(static_cast<std::size_t>(d + 1));
  RowMatrix vals;

  std::vector<double> sum(static_cast<std::size_t>(d) * c, 0.0);
  std::vector<double> sum2(static_cast<std::size_t>(d) * c, 0.0);
  long count = 0;
  while (true) {
    if (!enumerate) std::shuffle(perm.begin(), perm.end(), rng);
    FeatureSet s;
    masks[0] = s;
    for (int j = 0; j < d; ++j) {
      s = s.with(perm[j]);
      masks[j + 1] = s;
    }
    f.EvaluateMasked(xs, masks, vals);
    for (int j = 0; j < d; ++j) {
      const int i = perm[j];
      for (int o = 0; o < c; ++o) {
        const double delta = vals(j + 1, o) - vals(j, o);
        sum[i * c + o] += delta;
        sum2[i * c + o] += delta * delta;
      }
    }
    ++count;
    if (enumerate) {
      if (!std::next_permutation(perm.begin(), perm.end())) break;
    } else if (count >= m) {
      break;
    }
  }

  AttributionResult r = NewResult(IndexFamily::kShapley, 1, d, c);
  for (int i = 0; i < d; ++i) {
    std::vector<double> phi(static_cast<std::size_t>(c));
    std::vector<double> se(static_cast<std::size_t>(c), 0.0);
    for (int o = 0; o < c; ++o) {
      const double mean = sum[i * c + o] / count;
      phi[o] = mean;
      if (!enumerate && count > 1) {
        const double var = std::max(
            0.0, (sum2[i * c + o] / count - mean * mean) * count / (count - 1.0));
        se[o] = std::sqrt(var / count);
      }
    }
    r.values[1u << i] = std::move(phi);
    r.standard_errors[1u << i] = std::move(se);
  }
  const std::vector<double> empty = f(x, FeatureSet::Empty());
  const std::vector<double> full = f(x, FeatureSet::Full(d));
  r.base_value = empty;
  FillEfficiency(r, full, empty);
  SetPoint(r, x);
  r.metadata["method"] = enumerate ? "permutation-enumeration" : "permutation-sampling";
  r.metadata["permutations"] = std::to_string(count);
  r.metadata["seed"] = std::to_string(seed);
  return r;
}

AttributionResult ShapleyFromPurified(const PurifiedTable& purified) {
  const int d = purified.num_features();
  const int c = purified.output_dim();
  AttributionResult r = NewResult(IndexFamily::kShapley, 1, d, c);
  std::vector<double> phi(static_cast<std::size_t>(d) * c, 0.0);
  const std::uint32_t n = 1u << d;
  for (std::uint32_t m = 1; m < n; ++m) {
    const auto v = purified.at(FeatureSet(m));
    const double share = 1.0 / std::popcount(m);
    for (std::uint32_t b = m; b != 0; b &= b - 1) {
      const int i = std::countr_zero(b);
      for (int o = 0; o < c; ++o) phi[i * c + o] += share * v[o];
    }
  }
  for (int i = 0; i < d; ++i) {
    r.values[1u << i] = std::vector<double>(phi.begin() + i * c, phi.begin() + (i + 1) * c);
  }
  const auto empty = purified.at(FeatureSet::Empty());
  r.base_value.assign(empty.begin(), empty.end());
  // f([d]) - f(∅) is the sum of all non-empty purified terms.
  std::vector<double> gain(static_cast<std::size_t>(c), 0.0);
  for (std::uint32_t m = 1; m < n; ++m) {
    const auto v = purified.at(FeatureSet(m));
    for (int o = 0; o < c; ++o) gain[o] += v[o];
  }
  std::vector<double> zero(static_cast<std::size_t>(c), 0.0);
  FillEfficiency(r, gain, zero);
  r.metadata["method"] = "purified-unanimity";
  return r;
}

AttributionResult KernelShapLs(const SetFunctionTable& table) {
  const int d = table.num_features();
  const int c = table.output_dim();
  AttributionResult r = NewResult(IndexFamily::kShapley, 1, d, c);
  const auto empty = table.at(FeatureSet::Empty());
  const auto full = table.at(FeatureSet::Full(d));
  r.base_value.assign(empty.begin(), empty.end());
  std::vector<double> total(static_cast<std::size_t>(c));
  for (int o = 0; o < c; ++o) total[o] = full[o] - empty[o];

  if (d == 1) {
    r.values[1u] = total;
  } else {
    const WeightTable w = ShapKernelWeights(d);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d, c);
    const std::uint32_t full_bits = FeatureSet::Full(d).bits();
    for (std::uint32_t m = 1; m < full_bits; ++m) {
      const double ws = w.per_subset[std::popcount(m)];
      const auto v = table.at(FeatureSet(m));
      const auto idx = FeatureSet(m).indices();
      for (int i : idx) {
        for (int j : idx) gram(i, j) += ws;
        for (int o = 0; o < c; ++o) rhs(i, o) += ws * (v[o] - empty[o]);
      }
    }
    Eigen::MatrixXd phi;
    SolveConstrained(gram, rhs, total, &phi);
    for (int i = 0; i < d; ++i) {
      std::vector<double> v(static_cast<std::size_t>(c));
      for (int o = 0; o < c; ++o) v[o] = phi(i, o);
      r.values[1u << i] = std::move(v);
    }
  }
  FillEfficiency(r, table);
  r.metadata["method"] = "kernel-weighted-least-squares";
  return r;
}

AttributionResult KernelShapLs(const MaskedFunction& f, std::span<const double> x) {
  AttributionResult r = KernelShapLs(f.Table(x));
  SetPoint(r, x);
  return r;
}

AttributionResult FaithShapExact(const SetFunctionTable& table, int k) {
  const int d = table.num_features();
  const int c = table.output_dim();
  if (d > 20) throw InvalidArgument("faithful interaction index requires d <= 20");
  if (k < 1 || k > d) throw InvalidArgument("order k must lie in [1, d]");
  AttributionResult r = NewResult(IndexFamily::kFaith, k, d, c);
  const auto empty = table.at(FeatureSet::Empty());
  const auto full = table.at(FeatureSet::Full(d));
  r.base_value.assign(empty.begin(), empty.end());
  std::vector<double> total(static_cast<std::size_t>(c));
  for (int o = 0; o < c; ++o) total[o] = full[o] - empty[o];

  if (d == 1) {
    r.values[1u] = total;
    FillEfficiency(r, table);
    return r;
  }

  const WeightTable w = ShapKernelWeights(d);
  std::vector<std::uint32_t> basis;
  const std::uint32_t n = 1u << d;
  for (std::uint32_t m = 1; m < n; ++m) {
    if (std::popcount(m) <= k) basis.push_back(m);
  }
  // Gram entries depend on |T ∪ U| only.
  std::vector<double> g(static_cast<std::size_t>(d + 1), 0.0);
  for (int mm = 1; mm <= d; ++mm) {
    for (int s = mm; s < d; ++s) {
      g[mm] += w.per_subset[s] * static_cast<double>(Binomial(d - mm, s - mm));
    }
  }
  // b_T = Σ_{S ⊇ T, S proper} w(|S|) (v(S) - v(∅)) via a superset-sum sweep.
  std::vector<double> sup(static_cast<std::size_t>(n) * c, 0.0);
  for (std::uint32_t m = 1; m + 1 < n; ++m) {
    const double ws = w.per_subset[std::popcount(m)];
    const auto v = table.at(FeatureSet(m));
    for (int o = 0; o < c; ++o) sup[m * c + o] = ws * (v[o] - empty[o]);
  }
  for (int i = 0; i < d; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t m = 0; m < n; ++m) {
      if (m & bit) continue;
      for (int o = 0; o < c; ++o) sup[m * c + o] += sup[(m | bit) * c + o];
    }
  }

  const auto nb = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd gram(nb, nb);
  Eigen::MatrixXd rhs(nb, c);
  for (Eigen::Index a = 0; a < nb; ++a) {
    for (Eigen::Index b = 0; b < nb; ++b) {
      gram(a, b) = g[std::popcount(basis[a] | basis[b])];
    }
    for (int o = 0; o < c; ++o) rhs(a, o) = sup[basis[a] * c + o];
  }
  Eigen::MatrixXd phi;
  SolveConstrained(gram, rhs, total, &phi);
  for (Eigen::Index a = 0; a < nb; ++a) {
    std::vector<double> v(static_cast<std::size_t>(c));
    for (int o = 0; o < c; ++o) v[o] = phi(a, o);
    r.values[basis[a]] = std::move(v);
  }
  FillEfficiency(r, table);
  r.metadata["method"] = "kernel-weighted-least-squares";
  return r;
}

AttributionResult FaithShapExact(const MaskedFunction& f, std::span<const double> x,
                                 int k) {
  AttributionResult r = FaithShapExact(f.Table(x), k);
  SetPoint(r, x);
  return r;
}

Rational IndexCoefficient(IndexFamily family, int s, int t, int k) {
  if (s < 1 || s > k || t < 1) {
    throw InvalidArgument("coefficient needs 1 <= s <= k and t >= 1 (s=" +
                          std::to_string(s) + ", t=" + std::to_string(t) +
                          ", k=" + std::to_string(k) + ")");
  }
  if (t < s) return Rational(0);
  switch (family) {
    case IndexFamily::kShapley:
      if (k != 1) throw InvalidArgument("Shapley family has order 1");
      return Rational(1, t);
    case IndexFamily::kSII:
      return Rational(1, t - s + 1);
    case IndexFamily::kTaylor:
      if (s < k) return Rational(t == s ? 1 : 0);
      return Rational(1, Binomial(t, k));
    case IndexFamily::kNShapley: {
      Rational c(1, t - s + 1);
      for (int j = s + 1; j <= k; ++j) {
        if (t < j) break;
        c = c + Bernoulli(j - s) * Rational(Binomial(t - s, j - s), t - j + 1);
      }
      return c;
    }
    case IndexFamily::kFaith: {
      if (t == s) return Rational(1);
      if (t <= k) return Rational(0);
      const Rational::Int sign = ((k - s) % 2 == 0) ? 1 : -1;
      return Rational(sign * Binomial(k + s - 1, s - 1) * Binomial(t - s - 1, k - s),
                      Binomial(t + k - 1, k));
    }
    case IndexFamily::kArchipelago:
      break;
  }
  throw InvalidArgument("family has no coefficient table");
}

AttributionResult MobiusToIndex(const PurifiedTable& purified, IndexFamily family,
                                int k) {
  const int d = purified.num_features();
  const int c = purified.output_dim();
  if (k < 1 || k > d) throw InvalidArgument("order k must lie in [1, d]");
  if (family == IndexFamily::kShapley && k != 1) {
    throw InvalidArgument("Shapley family has order 1");
  }
  // coef[s][t] as doubles.
  std::vector<std::vector<double>> coef(static_cast<std::size_t>(k + 1),
                                        std::vector<double>(static_cast<std::size_t>(d + 1), 0.0));
  for (int s = 1; s <= k; ++s) {
    for (int t = s; t <= d; ++t) coef[s][t] = IndexCoefficient(family, s, t, k).ToDouble();
  }
  AttributionResult r = NewResult(family, k, d, c);
  const std::uint32_t n = 1u << d;
  const FeatureSet all = FeatureSet::Full(d);
  for (std::uint32_t m = 1; m < n; ++m) {
    const int s = std::popcount(m);
    if (s > k) continue;
    std::vector<double> v(static_cast<std::size_t>(c), 0.0);
    ForEachSubset(all - FeatureSet(m), [&](FeatureSet extra) {
      const FeatureSet t = FeatureSet(m) | extra;
      const double w = coef[s][t.size()];
      if (w == 0.0) return;
      const auto p = purified.at(t);
      for (int o = 0; o < c; ++o) v[o] += w * p[o];
    });
    r.values[m] = std::move(v);
  }
  const auto empty = purified.at(FeatureSet::Empty());
  r.base_value.assign(empty.begin(), empty.end());
  std::vector<double> gain(static_cast<std::size_t>(c), 0.0);
  for (std::uint32_t m = 1; m < n; ++m) {
    const auto p = purified.at(FeatureSet(m));
    for (int o = 0; o < c; ++o) gain[o] += p[o];
  }
  std::vector<double> zero(static_cast<std::size_t>(c), 0.0);
  FillEfficiency(r, gain, zero);
  r.metadata["method"] = "mobius-coefficients";
  return r;
}

SimpleIndices ComputeSimpleIndices(const SetFunctionTable& table, FeatureSet s) {
  const int d = table.num_features();
  if (s.empty()) throw InvalidArgument("interaction subset must be non-empty");
  SimpleIndices out;
  out.inclusion = DiscreteDerivative(table, s, FeatureSet::Empty());
  out.removal = DiscreteDerivative(table, s, FeatureSet::Full(d));
  out.archipelago.resize(out.inclusion.size());
  for (std::size_t o = 0; o < out.inclusion.size(); ++o) {
    out.archipelago[o] = 0.5 * (out.inclusion[o] + out.removal[o]);
  }
  return out;
}

SimpleIndices ComputeSimpleIndices(const MaskedFunction& f, std::span<const double> x,
                                   FeatureSet s) {
  const int d = f.num_features();
  const int c = f.output_dim();
  if (s.empty()) throw InvalidArgument("interaction subset must be non-empty");
  if (!s.fits(d)) throw InvalidArgument("subset outside [d]");
  std::vector<FeatureSet> masks;
  std::vector<double> signs;
  const FeatureSet rest = FeatureSet::Full(d) - s;
  ForEachSubset(s, [&](FeatureSet w) {
    const double sign = ((s.size() - w.size()) % 2 == 0) ? 1.0 : -1.0;
    masks.push_back(w);
    signs.push_back(sign);
    masks.push_back(rest | w);
    signs.push_back(sign);
  });
  RowMatrix xs(static_cast<Eigen::Index>(masks.size()), d);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    std::copy(x.begin(), x.end(), Row(xs, i).begin());
  }
  RowMatrix vals;
  f.EvaluateMasked(xs, masks, vals);
  SimpleIndices out;
  out.inclusion.assign(static_cast<std::size_t>(c), 0.0);
  out.removal.assign(static_cast<std::size_t>(c), 0.0);
  for (std::size_t j = 0; j < masks.size(); ++j) {
    auto& dst = (j % 2 == 0) ? out.inclusion : out.removal;
    for (int o = 0; o < c; ++o) dst[o] += signs[j] * vals(static_cast<Eigen::Index>(j), o);
  }
  out.archipelago.resize(static_cast<std::size_t>(c));
  for (int o = 0; o < c; ++o) {
    out.archipelago[o] = 0.5 * (out.inclusion[o] + out.removal[o]);
  }
  return out;
}

}  // namespace instashap
