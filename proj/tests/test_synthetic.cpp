#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "instashap/indices.hpp"
#include "instashap/masking.hpp"
#include "instashap/synthetic.hpp"

namespace instashap {
namespace {

double Corr(const RowMatrix& x, int a, int b) {
  const auto ca = x.col(a).array() - x.col(a).mean();
  const auto cb = x.col(b).array() - x.col(b).mean();
  return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

TEST(PairsGaussian, IndependentWhenRhoZero) {
  const RowMatrix x = PairsGaussian(4, 0.0).Sample(100000, 11);
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) EXPECT_NEAR(Corr(x, a, b), 0.0, 0.02);
  }
}

TEST(PairsGaussian, PairedCorrelation) {
  const RowMatrix x = PairsGaussian(4, 0.8).Sample(100000, 12);
  EXPECT_NEAR(Corr(x, 0, 1), 0.8, 0.02);
  EXPECT_NEAR(Corr(x, 2, 3), 0.8, 0.02);
  EXPECT_NEAR(Corr(x, 0, 2), 0.0, 0.02);
}

TEST(PairsGaussian, DeterministicGivenSeed) {
  const PairsGaussian w(10, 0.5);
  const RowMatrix a = w.Sample(500, 99);
  const RowMatrix b = w.Sample(500, 99);
  EXPECT_TRUE((a.array() == b.array()).all());
  EXPECT_FALSE((a.array() == w.Sample(500, 100).array()).all());
}

TEST(PairsGaussian, RejectsBadArguments) {
  EXPECT_THROW(PairsGaussian(3, 0.0), InvalidArgument);
  EXPECT_THROW(PairsGaussian(4, 1.5), InvalidArgument);
  EXPECT_THROW(PairsGaussian(4, 0.2).Sample(0, 1), InvalidArgument);
}

TEST(PairsGaussian, DegenerateConditionalIsDeterministic) {
  const PairsGaussian w(2, 1.0);
  std::mt19937_64 rng(5);
  std::vector<double> x = {0.7, -3.0};
  std::vector<double> out(2);
  w.SampleConditional(x, FeatureSet(0b01u), rng, out);
  EXPECT_EQ(out[0], 0.7);
  EXPECT_EQ(out[1], 0.7);
}

TEST(MultilinearTarget, KstarOneHasUnitVariance) {
  const PairsGaussian w(10, 0.5);
  const MultilinearTarget t = MakeMultilinearTarget(10, 1, CoefficientDistribution::kNormal, 3, w);
  EXPECT_EQ(t.max_order(), 1);
  const RowMatrix x = w.Sample(1000000, 4);
  double s = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double y = t.Evaluate(Row(x, i));
    s += y;
    s2 += y * y;
  }
  const double n = static_cast<double>(x.rows());
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0, 0.05);
}

TEST(MultilinearTarget, LaplaceKstarTwoHasUnitVariance) {
  const PairsGaussian w(10, 0.75);
  const MultilinearTarget t =
      MakeMultilinearTarget(10, 2, CoefficientDistribution::kLaplace, 8, w);
  EXPECT_EQ(t.max_order(), 2);
  EXPECT_EQ(t.coefficients().size(), 1u + 10u + 45u);
  const RowMatrix x = w.Sample(400000, 9);
  double s = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double y = t.Evaluate(Row(x, i));
    s += y;
    s2 += y * y;
  }
  const double n = static_cast<double>(x.rows());
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0, 0.05);
}

TEST(MultilinearTarget, ConstantTargetRejected) {
  const PairsGaussian w(4, 0.3);
  EXPECT_THROW(MultilinearTarget::Normalized(4, {{0u, 2.0}}, w), NumericalError);
}

TEST(MultilinearTarget, DeterministicCoefficients) {
  const PairsGaussian w(6, 0.25);
  const auto a = MakeMultilinearTarget(6, 2, CoefficientDistribution::kNormal, 21, w);
  const auto b = MakeMultilinearTarget(6, 2, CoefficientDistribution::kNormal, 21, w);
  EXPECT_EQ(a.coefficients(), b.coefficients());
  EXPECT_EQ(a.normalizer(), b.normalizer());
  EXPECT_THROW(MakeMultilinearTarget(6, 7, CoefficientDistribution::kNormal, 1, w),
               InvalidArgument);
  EXPECT_THROW(ParseCoefficientDistribution("cauchy"), InvalidArgument);
}

TEST(ExactConditional, TwoFeatureWorkedValues) {
  const MultilinearTarget f = TwoFeatureExampleTarget();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double rho = u(rng) / 2.0;
    const PairsGaussian w(2, rho);
    const std::vector<double> p = {u(rng), u(rng)};
    const double x = p[0], y = p[1];
    EXPECT_NEAR(ExactConditionalValue(f, w, p, FeatureSet(0b01u)), x + rho * x * x, 1e-12);
    EXPECT_NEAR(ExactConditionalValue(f, w, p, FeatureSet(0b10u)), rho * y + rho * y * y, 1e-12);
    EXPECT_NEAR(ExactConditionalValue(f, w, p, FeatureSet(0b11u)), x + x * y, 1e-12);
    EXPECT_NEAR(ExactConditionalValue(f, w, p, FeatureSet(0b00u)), rho, 1e-12);
  }
}

TEST(ExactConditional, AgreesWithMonteCarloConditional) {
  const PairsGaussian w(6, 0.6);
  const MultilinearTarget t = MakeMultilinearTarget(6, 3, CoefficientDistribution::kNormal, 2, w);
  const MonteCarloConditionalRemoval mc(ModelOfTarget(t), w, 4000, 77);
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::uint32_t> mask(0, 63);
  int outside = 0;
  for (int probe = 0; probe < 200; ++probe) {
    std::vector<double> x(6);
    w.SampleInto(rng, x);
    const FeatureSet s(mask(rng));
    double est, se;
    mc.EvaluateWithError(x, s, std::span<double>(&est, 1), std::span<double>(&se, 1));
    const double exact = ExactConditionalValue(t, w, x, s);
    if (std::abs(est - exact) > 3.0 * se + 1e-12) ++outside;
  }
  // At 3 SE roughly 0.3% of honest probes fall outside; allow a few.
  EXPECT_LE(outside, 4);
}

TEST(ExactConditional, EqualsMarginalUnderIndependence) {
  const PairsGaussian w(4, 0.0);
  const MultilinearTarget t = MakeMultilinearTarget(4, 4, CoefficientDistribution::kNormal, 5, w);
  // Closed-form marginal: unobserved factors average to zero.
  std::mt19937_64 rng(14);
  for (int probe = 0; probe < 50; ++probe) {
    std::vector<double> x(4);
    w.SampleInto(rng, x);
    for (std::uint32_t m = 0; m < 16; ++m) {
      double marginal = 0.0;
      for (const auto& [mono, beta] : t.coefficients()) {
        if ((mono & ~m) != 0) continue;
        double v = beta;
        for (int i : FeatureSet(mono).indices()) v *= x[i];
        marginal += v;
      }
      marginal /= t.normalizer();
      EXPECT_NEAR(ExactConditionalValue(t, w, x, FeatureSet(m)), marginal, 1e-12);
    }
  }
}

TEST(ExactShapley2D, IndependentUnitPoint) {
  const auto [px, py] = ExactShapley2D(0.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(px, 1.5);
  EXPECT_DOUBLE_EQ(py, 0.5);
}

TEST(ExactShapley2D, EfficiencyAndSymmetry) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const double rho = u(rng) / 2.0, x = u(rng), y = u(rng);
    const auto [px, py] = ExactShapley2D(rho, x, y);
    EXPECT_NEAR(px + py, x + x * y - rho, 1e-12);
  }
  const auto [sx, sy] = ExactShapley2D(1.0, 0.8, 0.8);
  EXPECT_NEAR(sx, sy, 1e-12);
}

TEST(ExactShapley2D, MatchesEnumerationOverExactOracle) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const double rho = u(rng) / 2.0;
    const ExactConditionalRemoval f(TwoFeatureExampleTarget(), PairsGaussian(2, rho));
    const std::vector<double> p = {u(rng), u(rng)};
    const auto r = ShapleyExact(f, p);
    const auto [px, py] = ExactShapley2D(rho, p[0], p[1]);
    EXPECT_NEAR(r.value(FeatureSet(1u)), px, 1e-10);
    EXPECT_NEAR(r.value(FeatureSet(2u)), py, 1e-10);
  }
}

TEST(Samples, CsvExportHasHeader) {
  const auto path = std::filesystem::temp_directory_path() / "instashap_samples.csv";
  RowMatrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const std::vector<double> y = {0.5, -1.0};
  WriteSamplesCsv(path.string(), x, y);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "x1,x2,x3,y");
  EXPECT_EQ(row, "1,2,3,0.5");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace instashap
