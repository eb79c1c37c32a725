#pragma once

#include <map>
#include <span>
#include <vector>

#include "instashap/feature_set.hpp"

namespace instashap {

// Sparse multivariate polynomial over d real variables. Used as the exact
// function representation for the correlated-pairs Gaussian world, where
// conditional expectations of polynomials are again polynomials.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  Polynomial() = default;
  explicit Polynomial(int d) : d_(d) {}

  static Polynomial Constant(int d, double c);
  static Polynomial Variable(int d, int i);
  // Product of x_i over i in s, times coef.
  static Polynomial Monomial(int d, FeatureSet s, double coef = 1.0);

  int num_vars() const { return d_; }
  const std::map<Exponents, double>& terms() const { return terms_; }

  void AddTerm(const Exponents& e, double coef);
  double Evaluate(std::span<const double> x) const;
  // Variables with a nonzero exponent in some term.
  FeatureSet Support() const;
  int Degree() const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  // Drops terms with |coef| <= tol.
  void Prune(double tol = 0.0);

 private:
  int d_ = 0;
  std::map<Exponents, double> terms_;
};

// E[Z^n] for Z ~ N(0, 1).
double StandardNormalMoment(int n);

// E[X^n] for X ~ N(mean, var).
double NormalMoment(int n, double mean, double var);

}  // namespace instashap
