#include "instashap/polynomial.hpp"

#include <cmath>

#include "instashap/rational.hpp"

namespace instashap {

Polynomial Polynomial::Constant(int d, double c) {
  Polynomial p(d);
  p.AddTerm(Exponents(d, 0), c);
  return p;
}

Polynomial Polynomial::Variable(int d, int i) {
  Polynomial p(d);
  Exponents e(d, 0);
  e[i] = 1;
  p.AddTerm(e, 1.0);
  return p;
}

Polynomial Polynomial::Monomial(int d, FeatureSet s, double coef) {
  Polynomial p(d);
  Exponents e(d, 0);
  for (int i : s.indices()) e[i] = 1;
  p.AddTerm(e, coef);
  return p;
}

void Polynomial::AddTerm(const Exponents& e, double coef) {
  if (static_cast<int>(e.size()) != d_) {
    throw InvalidArgument("exponent vector has wrong length");
  }
  if (coef == 0.0) return;
  auto [it, inserted] = terms_.emplace(e, coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::Evaluate(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& [e, coef] : terms_) {
    double v = coef;
    for (int i = 0; i < d_; ++i) {
      for (int k = 0; k < e[i]; ++k) v *= x[i];
    }
    total += v;
  }
  return total;
}

FeatureSet Polynomial::Support() const {
  std::uint32_t bits = 0;
  for (const auto& [e, coef] : terms_) {
    for (int i = 0; i < d_; ++i) {
      if (e[i] > 0) bits |= 1u << i;
    }
  }
  return FeatureSet(bits);
}

int Polynomial::Degree() const {
  int deg = 0;
  for (const auto& [e, coef] : terms_) {
    int t = 0;
    for (int v : e) t += v;
    deg = std::max(deg, t);
  }
  return deg;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (d_ == 0) d_ = o.d_;
  for (const auto& [e, c] : o.terms_) AddTerm(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (d_ == 0) d_ = o.d_;
  for (const auto& [e, c] : o.terms_) AddTerm(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out(std::max(a.d_, b.d_));
  Polynomial::Exponents e(out.d_, 0);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      for (int i = 0; i < out.d_; ++i) e[i] = ea[i] + eb[i];
      out.AddTerm(e, ca * cb);
    }
  }
  return out;
}

void Polynomial::Prune(double tol) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) <= tol) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

double StandardNormalMoment(int n) {
  if (n % 2 == 1) return 0.0;
  double r = 1.0;
  for (int k = n - 1; k > 0; k -= 2) r *= k;
  return r;
}

double NormalMoment(int n, double mean, double var) {
  double total = 0.0;
  for (int j = 0; 2 * j <= n; ++j) {
    total += static_cast<double>(Binomial(n, 2 * j)) *
             std::pow(mean, n - 2 * j) * std::pow(var, j) *
             StandardNormalMoment(2 * j);
  }
  return total;
}

}  // namespace instashap
