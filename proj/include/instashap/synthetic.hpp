#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>

#include "instashap/feature_set.hpp"
#include "instashap/polynomial.hpp"
#include "instashap/types.hpp"

namespace instashap {

// Zero-mean unit-variance Gaussian inputs whose covariance is block diagonal
// with 2x2 blocks [[1, rho], [rho, 1]]: feature 2j pairs with 2j+1 (0-based).
class PairsGaussian {
 public:
  PairsGaussian(int d, double rho);

  int num_features() const { return d_; }
  double rho() const { return rho_; }
  static int Partner(int i) { return i ^ 1; }
  // True when |rho| = 1 and the conditional of a partner is a point mass.
  bool degenerate() const { return std::abs(rho_) == 1.0; }

  // n i.i.d. rows; identical output for identical seed.
  RowMatrix Sample(int n, std::uint64_t seed) const;
  void SampleInto(std::mt19937_64& rng, std::span<double> out) const;

  // Replaces coordinates outside `observed` with a draw from
  // p(X_{-S} | X_S = x_S).
  void SampleConditional(std::span<const double> x, FeatureSet observed,
                         std::mt19937_64& rng, std::span<double> out) const;

  // Exact conditional projection M_T p: a polynomial in x_T only.
  Polynomial ConditionalExpectation(const Polynomial& p, FeatureSet given) const;
  double Expectation(const Polynomial& p) const;

 private:
  int d_;
  double rho_;
};

enum class CoefficientDistribution { kNormal, kLaplace };

CoefficientDistribution ParseCoefficientDistribution(const std::string& name);

// y = (sum_S beta_S prod_{i in S} x_i) / normalizer.
class MultilinearTarget {
 public:
  MultilinearTarget(int d, std::map<std::uint32_t, double> coefficients,
                    double normalizer = 1.0);

  // Sets the normalizer so that Var[y] = 1 under `world` (computed exactly).
  // Throws NumericalError when the target has zero variance.
  static MultilinearTarget Normalized(int d,
                                      std::map<std::uint32_t, double> coefficients,
                                      const PairsGaussian& world);

  int num_features() const { return d_; }
  double normalizer() const { return normalizer_; }
  const std::map<std::uint32_t, double>& coefficients() const { return coefs_; }
  int max_order() const;

  double Evaluate(std::span<const double> x) const;
  // The normalized target as an explicit polynomial.
  Polynomial ToPolynomial() const;

 private:
  int d_;
  std::map<std::uint32_t, double> coefs_;
  double normalizer_;
};

// beta_S drawn i.i.d. for every |S| <= kstar, then normalized to unit variance
// under `world`.
MultilinearTarget MakeMultilinearTarget(int d, int kstar,
                                        CoefficientDistribution dist,
                                        std::uint64_t seed,
                                        const PairsGaussian& world);

// f(x, y) = x + x y, the two-feature worked example.
MultilinearTarget TwoFeatureExampleTarget();

// E[y(x_S, X_{-S}) | X_S = x_S] in closed form.
double ExactConditionalValue(const MultilinearTarget& target,
                             const PairsGaussian& world,
                             std::span<const double> x, FeatureSet s);

// Closed-form Shapley values of f = x + xy under the two-feature world.
std::pair<double, double> ExactShapley2D(double rho, double x, double y);

// Writes rows as CSV with header x1..xd,y.
void WriteSamplesCsv(const std::string& path, const RowMatrix& x,
                     std::span<const double> y);

}  // namespace instashap
