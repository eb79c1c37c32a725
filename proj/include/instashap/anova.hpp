#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "instashap/feature_set.hpp"
#include "instashap/masking.hpp"
#include "instashap/polynomial.hpp"
#include "instashap/set_function.hpp"
#include "instashap/synthetic.hpp"
#include "instashap/types.hpp"

namespace instashap {

// Möbius components f~_S(x) of f(x, ·) at one point.
PurifiedTable PurifyAt(const MaskedFunction& f, std::span<const double> x);

using PointSampler = std::function<void(std::mt19937_64&, std::span<double>)>;
PointSampler SamplerOf(const PairsGaussian& world);

// Monte-Carlo statistics of the purified components f~_S(X_S), indexed by
// bitmask. Standard errors are per-entry.
struct SobolReport {
  int d = 0;
  long n = 0;
  // V_S = Var[f~_S].
  std::vector<double> variance;
  std::vector<double> variance_se;
  // Cov[F, f~_S].
  std::vector<double> covariance;
  std::vector<double> covariance_se;
  // E[F f~_S], which for non-empty S agrees with the centered value in
  // expectation because f~_S has mean zero.
  std::vector<double> uncentered;
  std::vector<double> uncentered_se;

  double total_variance = 0.0;  // Var[F]
  double total_variance_se = 0.0;
  double second_moment = 0.0;  // E[F^2]
  double second_moment_se = 0.0;

  // Σ_S V_S - Var[F] and Σ_S C_S - Var[F], with standard errors from the
  // per-sample contributions.
  double variance_sum_gap = 0.0;
  double variance_sum_gap_se = 0.0;
  double covariance_sum_gap = 0.0;
  double covariance_sum_gap_se = 0.0;
  // Σ_S E[F f~_S] - E[F^2].
  double uncentered_sum_gap = 0.0;
  double uncentered_sum_gap_se = 0.0;

  // Var[F] indistinguishable from zero.
  bool degenerate = false;

  double V(FeatureSet s) const { return variance[s.bits()]; }
  double C(FeatureSet s) const { return covariance[s.bits()]; }
};

// One pass over `samples`. F defaults to f(x, [d]); `output` selects the
// component for vector-valued functions.
SobolReport SobolAnalysis(const MaskedFunction& f, const RowMatrix& samples,
                          const FullModel* full = nullptr, int output = 0);

SobolReport SobolIndices(const MaskedFunction& f, const PointSampler& sampler,
                         long n, std::uint64_t seed);
SobolReport SobolCovariances(const FullModel& full, const MaskedFunction& f,
                             const PointSampler& sampler, long n,
                             std::uint64_t seed);

// |gap| <= z * se, with a floor for identities that hold exactly per sample.
bool WithinStandardErrors(double gap, double se, double z = 3.0, double scale = 1.0);

enum class InteractionKind { kSynergy, kRedundancy, kNone };
std::string ToString(InteractionKind kind);

// Synergy when V_S exceeds `threshold` and C_S > 0, redundancy when it exceeds
// it and C_S < 0, none otherwise.
InteractionKind ClassifyInteraction(double variance, double covariance,
                                    double threshold);
// Threshold taken as 3 standard errors of V_S.
InteractionKind ClassifyInteraction(const SobolReport& report, FeatureSet s);

// Drops every set strictly contained in another member; drops ∅.
std::vector<FeatureSet> MaximalElements(const std::vector<FeatureSet>& sets);

enum class SweepOrder { kGaussSeidel, kJacobi };

// Additive fit F ≈ intercept + Σ_T g_T(x_T) over a frontier of maximal sets,
// with each g_T a polynomial in x_T.
struct FrontierSolution {
  std::vector<FeatureSet> frontier;
  std::vector<Polynomial> components;
  double intercept = 0.0;
  // sqrt(E[(F - intercept - Σ g_T)^2]) after each sweep; entry 0 is the
  // all-zero start.
  std::vector<double> residual_trace;
  double residual = 0.0;
  int sweeps = 0;
  bool converged = false;

  double Component(FeatureSet t, std::span<const double> x) const;
  double Predict(std::span<const double> x) const;
};

// Repeated conditional projections g_T <- M_T(F - intercept - Σ_{U≠T} g_U),
// computed exactly for polynomial targets in the pairs world. Stops early when
// one sweep moves the fitted sum by less than `tol` in root mean square; never
// throws on non-convergence.
FrontierSolution NeumannFrontierSolve(const Polynomial& target,
                                      const PairsGaussian& world,
                                      const std::vector<FeatureSet>& frontier,
                                      int max_sweeps,
                                      SweepOrder order = SweepOrder::kGaussSeidel,
                                      double tol = 1e-12);

// The same iteration on samples, with M_T estimated by averaging over the k
// nearest neighbours in x_T.
struct EmpiricalFrontierSolution {
  std::vector<FeatureSet> frontier;
  double intercept = 0.0;
  // fitted[j][i]: component j at sample i.
  std::vector<std::vector<double>> fitted;
  std::vector<double> residual_trace;  // root mean squared residual
  int sweeps = 0;
  bool converged = false;
};

EmpiricalFrontierSolution NeumannFrontierSolveEmpirical(
    const RowMatrix& x, std::span<const double> y,
    const std::vector<FeatureSet>& frontier, int max_sweeps, int neighbours = 50,
    SweepOrder order = SweepOrder::kGaussSeidel, double tol = 1e-10);

}  // namespace instashap
