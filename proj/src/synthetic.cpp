#include "instashap/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <vector>

#include "instashap/rational.hpp"

namespace instashap {

namespace {

struct PairTerm {
  int ea;
  int eb;
  double coef;
};

// E[X_b^eb | X_a = x_a] expanded as a polynomial in x_a (the returned ea
// exponents already include the given power of x_a).
std::vector<PairTerm> ProjectOntoOne(int e_given, int e_other, double rho) {
  std::vector<PairTerm> out;
  const double cond_var = 1.0 - rho * rho;
  for (int j = 0; 2 * j <= e_other; ++j) {
    const double c = static_cast<double>(Binomial(e_other, 2 * j)) *
                     std::pow(rho, e_other - 2 * j) * std::pow(cond_var, j) *
                     StandardNormalMoment(2 * j);
    if (c != 0.0) out.push_back({e_given + e_other - 2 * j, 0, c});
  }
  return out;
}

// E[X_a^ea X_b^eb] for the unit bivariate normal with correlation rho.
double BivariateMoment(int ea, int eb, double rho) {
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double total = 0.0;
  for (int m = 0; m <= eb; ++m) {
    total += static_cast<double>(Binomial(eb, m)) * std::pow(rho, m) *
             std::pow(s, eb - m) * StandardNormalMoment(ea + m) *
             StandardNormalMoment(eb - m);
  }
  return total;
}

}  // namespace

PairsGaussian::PairsGaussian(int d, double rho) : d_(d), rho_(rho) {
  if (d < 2 || d % 2 != 0) {
    throw InvalidArgument("pairs world needs an even feature count >= 2");
  }
  if (!(std::abs(rho) <= 1.0)) {
    throw InvalidArgument("correlation must lie in [-1, 1]");
  }
}

void PairsGaussian::SampleInto(std::mt19937_64& rng, std::span<double> out) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(1.0 - rho_ * rho_);
  for (int a = 0; a < d_; a += 2) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    out[a] = z1;
    out[a + 1] = rho_ * z1 + s * z2;
  }
}

RowMatrix PairsGaussian::Sample(int n, std::uint64_t seed) const {
  if (n < 1) throw InvalidArgument("sample count must be positive");
  std::mt19937_64 rng(seed);
  RowMatrix x(n, d_);
  for (int i = 0; i < n; ++i) SampleInto(rng, Row(x, i));
  return x;
}

void PairsGaussian::SampleConditional(std::span<const double> x,
                                      FeatureSet observed, std::mt19937_64& rng,
                                      std::span<double> out) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(1.0 - rho_ * rho_);
  for (int a = 0; a < d_; a += 2) {
    const int b = a + 1;
    const bool oa = observed.contains(a);
    const bool ob = observed.contains(b);
    if (oa && ob) {
      out[a] = x[a];
      out[b] = x[b];
    } else if (oa) {
      out[a] = x[a];
      out[b] = rho_ * x[a] + s * normal(rng);
    } else if (ob) {
      out[b] = x[b];
      out[a] = rho_ * x[b] + s * normal(rng);
    } else {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      out[a] = z1;
      out[b] = rho_ * z1 + s * z2;
    }
  }
}

Polynomial PairsGaussian::ConditionalExpectation(const Polynomial& p,
                                                 FeatureSet given) const {
  if (p.num_vars() != d_) throw InvalidArgument("polynomial dimension mismatch");
  Polynomial out(d_);
  for (const auto& [e, coef] : p.terms()) {
    // Expand the product of per-pair factors.
    std::vector<std::pair<Polynomial::Exponents, double>> partial = {
        {Polynomial::Exponents(d_, 0), coef}};
    for (int a = 0; a < d_; a += 2) {
      const int b = a + 1;
      const bool ga = given.contains(a);
      const bool gb = given.contains(b);
      std::vector<PairTerm> factor;
      if ((ga && gb) || (e[a] == 0 && e[b] == 0)) {
        factor = {{e[a], e[b], 1.0}};
      } else if (ga) {
        factor = ProjectOntoOne(e[a], e[b], rho_);
      } else if (gb) {
        for (const auto& t : ProjectOntoOne(e[b], e[a], rho_)) {
          factor.push_back({0, t.ea, t.coef});
        }
      } else {
        const double m = BivariateMoment(e[a], e[b], rho_);
        if (m != 0.0) factor = {{0, 0, m}};
      }
      std::vector<std::pair<Polynomial::Exponents, double>> next;
      next.reserve(partial.size() * factor.size());
      for (const auto& [pe, pc] : partial) {
        for (const auto& f : factor) {
          auto ne = pe;
          ne[a] = f.ea;
          ne[b] = f.eb;
          next.emplace_back(std::move(ne), pc * f.coef);
        }
      }
      partial = std::move(next);
      if (partial.empty()) break;
    }
    for (const auto& [pe, pc] : partial) out.AddTerm(pe, pc);
  }
  return out;
}

double PairsGaussian::Expectation(const Polynomial& p) const {
  const Polynomial c = ConditionalExpectation(p, FeatureSet::Empty());
  double total = 0.0;
  for (const auto& [e, coef] : c.terms()) total += coef;
  return total;
}

CoefficientDistribution ParseCoefficientDistribution(const std::string& name) {
  if (name == "normal") return CoefficientDistribution::kNormal;
  if (name == "laplace") return CoefficientDistribution::kLaplace;
  throw InvalidArgument("unknown coefficient distribution '" + name +
                        "' (expected normal|laplace)");
}

MultilinearTarget::MultilinearTarget(int d,
                                     std::map<std::uint32_t, double> coefficients,
                                     double normalizer)
    : d_(d), coefs_(std::move(coefficients)), normalizer_(normalizer) {
  if (d < 1 || d > 31) throw InvalidArgument("feature count out of range");
  if (!(normalizer > 0.0)) throw InvalidArgument("normalizer must be positive");
  for (const auto& [mask, beta] : coefs_) {
    if (!FeatureSet(mask).fits(d)) {
      throw InvalidArgument("coefficient subset outside [d]");
    }
  }
}

MultilinearTarget MultilinearTarget::Normalized(
    int d, std::map<std::uint32_t, double> coefficients,
    const PairsGaussian& world) {
  MultilinearTarget raw(d, coefficients, 1.0);
  const Polynomial p = raw.ToPolynomial();
  const double mean = world.Expectation(p);
  const double second = world.Expectation(p * p);
  const double var = second - mean * mean;
  if (!(var > 1e-12 * std::max(1.0, second))) {
    throw NumericalError("target has zero variance; cannot normalize");
  }
  return MultilinearTarget(d, std::move(coefficients), std::sqrt(var));
}

int MultilinearTarget::max_order() const {
  int k = 0;
  for (const auto& [mask, beta] : coefs_) k = std::max(k, FeatureSet(mask).size());
  return k;
}

double MultilinearTarget::Evaluate(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& [mask, beta] : coefs_) {
    double v = beta;
    for (std::uint32_t b = mask; b != 0; b &= b - 1) v *= x[std::countr_zero(b)];
    total += v;
  }
  return total / normalizer_;
}

Polynomial MultilinearTarget::ToPolynomial() const {
  Polynomial p(d_);
  for (const auto& [mask, beta] : coefs_) {
    p += Polynomial::Monomial(d_, FeatureSet(mask), beta / normalizer_);
  }
  return p;
}

MultilinearTarget MakeMultilinearTarget(int d, int kstar,
                                        CoefficientDistribution dist,
                                        std::uint64_t seed,
                                        const PairsGaussian& world) {
  if (kstar < 1 || kstar > d) throw InvalidArgument("kstar must lie in [1, d]");
  if (world.num_features() != d) throw InvalidArgument("world dimension mismatch");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::map<std::uint32_t, double> coefs;
  const std::uint32_t n = 1u << d;
  for (std::uint32_t m = 0; m < n; ++m) {
    if (FeatureSet(m).size() > kstar) continue;
    double beta;
    if (dist == CoefficientDistribution::kNormal) {
      beta = normal(rng);
    } else {
      // Laplace(0, 1) as a difference of two unit exponentials.
      beta = expo(rng) - expo(rng);
    }
    coefs[m] = beta;
  }
  return MultilinearTarget::Normalized(d, std::move(coefs), world);
}

MultilinearTarget TwoFeatureExampleTarget() {
  return MultilinearTarget(2, {{0b01u, 1.0}, {0b11u, 1.0}}, 1.0);
}

double ExactConditionalValue(const MultilinearTarget& target,
                             const PairsGaussian& world,
                             std::span<const double> x, FeatureSet s) {
  const int d = target.num_features();
  if (world.num_features() != d) throw InvalidArgument("world dimension mismatch");
  const double rho = world.rho();
  const std::uint32_t obs = s.bits();
  double total = 0.0;
  for (const auto& [mask, beta] : target.coefficients()) {
    double v = beta;
    for (int a = 0; a < d && v != 0.0; a += 2) {
      const std::uint32_t in = (mask >> a) & 3u;
      if (in == 0) continue;
      const bool oa = (obs >> a) & 1u;
      const bool ob = (obs >> (a + 1)) & 1u;
      if (in == 3u) {
        if (oa && ob) {
          v *= x[a] * x[a + 1];
        } else if (oa) {
          v *= rho * x[a] * x[a];
        } else if (ob) {
          v *= rho * x[a + 1] * x[a + 1];
        } else {
          v *= rho;
        }
      } else {
        const int f = (in == 1u) ? a : a + 1;
        const int partner = PairsGaussian::Partner(f);
        const bool of = (obs >> f) & 1u;
        const bool op = (obs >> partner) & 1u;
        if (of) {
          v *= x[f];
        } else if (op) {
          v *= rho * x[partner];
        } else {
          v = 0.0;
        }
      }
    }
    total += v;
  }
  return total / target.normalizer();
}

std::pair<double, double> ExactShapley2D(double rho, double x, double y) {
  const double phi_x =
      (x - 0.5 * rho * y) + (0.5 * x * y + 0.5 * rho * (x * x - y * y - 1.0));
  const double phi_y =
      (0.5 * rho * y) + (0.5 * x * y + 0.5 * rho * (y * y - x * x - 1.0));
  return {phi_x, phi_y};
}

void WriteSamplesCsv(const std::string& path, const RowMatrix& x,
                     std::span<const double> y) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << "x" << (j + 1) << ",";
  out << "y\n";
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << x(i, j) << ",";
    out << y[static_cast<std::size_t>(i)] << "\n";
  }
}

}  // namespace instashap
