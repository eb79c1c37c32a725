#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "instashap/eval.hpp"
#include "instashap/gam.hpp"
#include "instashap/synthetic.hpp"

namespace instashap {
namespace {

RowMatrix Gaussian(int n, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RowMatrix x(n, m);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

TEST(ShapMse, ZeroForIdenticalInputs) {
  const RowMatrix a = Gaussian(20, 6, 1);
  const auto r = ShapMse(a, a);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.normalized, 0.0);
}

TEST(ShapMse, ZeroPredictionGivesMeanSquaredOracle) {
  const RowMatrix a = Gaussian(20, 6, 2);
  const auto r = ShapMse(RowMatrix::Zero(20, 6), a);
  EXPECT_NEAR(r.mse, a.squaredNorm() / a.size(), 1e-15);
  EXPECT_NEAR(r.normalized, r.mse / r.oracle_variance, 1e-15);
}

TEST(ShapMse, SymmetricInArguments) {
  const RowMatrix a = Gaussian(10, 3, 3), b = Gaussian(10, 3, 4);
  EXPECT_DOUBLE_EQ(ShapMse(a, b).mse, ShapMse(b, a).mse);
}

TEST(ShapMse, RejectsMisalignment) {
  EXPECT_THROW(ShapMse(RowMatrix::Zero(3, 2), RowMatrix::Zero(3, 3)), InvalidArgument);
  EXPECT_THROW(ShapMse(std::vector<AttributionResult>(2), std::vector<AttributionResult>(3)),
               InvalidArgument);
}

TEST(ShapMse, UsesSingletonAttributionsOnly) {
  const PairsGaussian w(2, 0.4);
  const ExactConditionalRemoval f(TwoFeatureExampleTarget(), w);
  const RowMatrix x = w.Sample(5, 9);
  std::vector<AttributionResult> exact, faith;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    exact.push_back(ShapleyExact(f, Row(x, i)));
    faith.push_back(FaithShapExact(f, Row(x, i), 2));
  }
  // Order-2 Faith singletons differ from Shapley but the pair entry is ignored.
  const auto m = SingletonMatrix(exact);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_NEAR(m(0, 0), ExactShapley2D(0.4, x(0, 0), x(0, 1)).first, 1e-10);
  EXPECT_EQ(ShapMse(exact, exact).mse, 0.0);
  EXPECT_GT(ShapMse(faith, exact).mse, 0.0);
}

TEST(Nmse, PerfectIsZeroAndMeanIsOne) {
  const RowMatrix y = Gaussian(100, 1, 5);
  EXPECT_EQ(Nmse(y, y), 0.0);
  const RowMatrix mean = RowMatrix::Constant(100, 1, y.mean());
  EXPECT_NEAR(Nmse(mean, y), 1.0, 1e-12);
}

TEST(Nmse, ZeroVarianceThrows) {
  EXPECT_THROW(Nmse(RowMatrix::Zero(4, 1), RowMatrix::Constant(4, 1, 2.0)), InvalidArgument);
}

TEST(Accuracy, CountsArgmaxHits) {
  RowMatrix s(4, 3);
  s << 0.1, 0.8, 0.1,  //
      2.0, 1.0, 0.0,   //
      0.0, 0.0, 5.0,   //
      0.3, 0.2, 0.1;
  RowMatrix y(4, 1);
  y << 1, 0, 2, 2;
  EXPECT_DOUBLE_EQ(Accuracy(s, y), 0.75);
}

TEST(TrustGap, IdenticalScoresAreScenarioAAtAnyMargin) {
  for (double m : {0.0, 0.05, 0.5}) {
    EXPECT_EQ(TrustGap(0.2, {{"gam1", 0.2}}, "nmse", false, m).verdict, Verdict::kScenarioA);
    EXPECT_EQ(TrustGap(0.8, {{"gam1", 0.8}}, "accuracy", true, m).verdict,
              Verdict::kScenarioA);
  }
}

TEST(TrustGap, BikeshareLikeScoresAreScenarioA) {
  const auto r = TrustGap(0.0659, {{"gam1", 0.174}, {"gam3", 0.0623}}, "nmse", false);
  EXPECT_EQ(r.verdict, Verdict::kScenarioA);
  EXPECT_EQ(r.best_gam, "gam3");
  EXPECT_LT(r.best_gap, 0.0);
  EXPECT_NEAR(r.gap.at("gam1"), 0.174 - 0.0659, 1e-15);
}

TEST(TrustGap, VerdictIsMonotoneInMargin) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double bb = u(rng), g = u(rng);
    const bool hib = trial % 2;
    bool seen_a = false;
    for (double m = 0.0; m <= 3.0; m += 0.05) {
      const bool a = TrustGap(bb, {{"g", g}}, "s", hib, m).verdict == Verdict::kScenarioA;
      EXPECT_FALSE(seen_a && !a) << bb << " " << g << " " << m;
      seen_a = seen_a || a;
    }
  }
}

TEST(TrustGap, ThirdOrderTargetDefeatsFirstOrderGam) {
  // y = x1 x2 x3 on independent inputs has no first-order signal at all.
  const RowMatrix x = PairsGaussian(4, 0.0).Sample(4000, 7);
  RowMatrix y(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, 0) = x(i, 0) * x(i, 1) * x(i, 2);
  const Dataset data = MakeRegressionDataset(x.leftCols(3), y);
  TrainConfig c;
  c.optimizer = OptimizerKind::kConjugateGradient;
  c.epochs = 200;
  c.validation_fraction = 0.0;
  c.smoothness = 0.0;
  const auto gam1 = TrainGamOnLabels(data, OrderFrontier(3, 1), c).model;
  const auto full = TrainGamOnLabels(data, OrderFrontier(3, 3), c).model;
  const double nmse1 = Nmse(gam1.PredictBatch(data.x), data.y);
  const double nmse3 = Nmse(full.PredictBatch(data.x), data.y);
  EXPECT_GT(nmse1, 0.9);
  EXPECT_LT(nmse3, 0.1);
  const auto r = TrustGap(nmse3, {{"gam1", nmse1}}, "nmse", false);
  EXPECT_EQ(r.verdict, Verdict::kScenarioB);
  EXPECT_EQ(ToJson(r)["verdict"], "scenario-B");
}

TEST(TraceCompletion, ReconstructsAdditiveTargetAtZeroCorrelation) {
  const PairsGaussian w(4, 0.0);
  const auto target = MakeMultilinearTarget(4, 1, CoefficientDistribution::kNormal, 3, w);
  const ExactConditionalRemoval f(target, w);
  const std::vector<double> anchor = {0.3, -1.2, 0.7, 2.0};
  const TraceCompletion completion(ExactShapleyFunction(f), anchor);
  const std::vector<double> none(4, 0.0);
  double f_empty = 0.0;
  f.Evaluate(none, FeatureSet::Empty(), std::span<double>(&f_empty, 1));
  const RowMatrix probes = w.Sample(50, 4);
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    EXPECT_NEAR(completion(Row(probes, i)), target.Evaluate(Row(probes, i)) - f_empty, 1e-6);
  }
}

TEST(TraceCompletion, BlindToPureInteraction) {
  const PairsGaussian w(2, 0.0);
  const ExactConditionalRemoval f(MultilinearTarget(2, {{3u, 1.0}}), w);
  const TraceCompletion completion(ExactShapleyFunction(f), {0.0, 0.0});
  const RowMatrix probes = w.Sample(50, 5);
  double max_f = 0.0;
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    EXPECT_NEAR(completion(Row(probes, i)), 0.0, 1e-12);
    max_f = std::max(max_f, std::abs(probes(i, 0) * probes(i, 1)));
  }
  EXPECT_GT(max_f, 0.5);
}

TEST(TraceCompletion, OneFeatureEqualsShapley) {
  const MultilinearTarget t1(1, {{1u, 1.5}});
  const LambdaMaskedFunction f1(1, 1, RemovalMode::kModel,
                                [&](std::span<const double> x, FeatureSet s, std::span<double> out) {
    out[0] = s.empty() ? 0.0 : t1.Evaluate(x);
  });
  const ShapleyFunction phi = ExactShapleyFunction(f1);
  const TraceCompletion completion(phi, {0.4});
  for (double v : {-2.0, 0.0, 1.3}) {
    const std::vector<double> x = {v};
    EXPECT_DOUBLE_EQ(completion(x), phi(x)[0]);
  }
}

TEST(MetricSeries, CsvAndValidation) {
  MetricSeries s;
  s.name = "model_shap_mse";
  s.Add(0, 1.0, 0.1);
  s.Add(1, 0.5, 0.05);
  s.Add(2, 0.25, 0.02);
  EXPECT_TRUE(s.Decreased());
  const auto path = (std::filesystem::temp_directory_path() / "instashap_series.csv").string();
  s.WriteCsv(path);
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  std::remove(path.c_str());
  EXPECT_EQ(header, "epoch,value,se");
  EXPECT_EQ(first, "0,1,0.10000000000000001");
  s.x[2] = 1;
  EXPECT_THROW(s.Validate(), InvalidArgument);
}

TEST(Json, AttributionNamesSubsets) {
  const PairsGaussian w(2, 0.0);
  const ExactConditionalRemoval f(TwoFeatureExampleTarget(), w);
  const std::vector<double> x = {1.0, 2.0};
  const auto j = ToJson(FaithShapExact(f, x, 2), {"temp", "hour"});
  EXPECT_EQ(j["family"], "faith");
  ASSERT_EQ(j["attributions"].size(), 3u);
  EXPECT_EQ(j["attributions"][2]["subset"], "temp|hour");
  EXPECT_NEAR(j["attributions"][2]["value"][0].get<double>(), 2.0, 1e-12);
}

TEST(Json, SobolReportListsEverySubset) {
  const PairsGaussian w(2, 0.5);
  const ExactConditionalRemoval f(TwoFeatureExampleTarget(), w);
  const auto r = SobolIndices(f, SamplerOf(w), 2000, 1);
  const auto j = ToJson(r);
  EXPECT_EQ(j["subsets"].size(), 4u);
  EXPECT_EQ(j["subsets"][3]["subset"], "x1|x2");
  EXPECT_EQ(j["n"], 2000);
}

}  // namespace
}  // namespace instashap
