#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "instashap/experiments.hpp"
#include "instashap/serialize.hpp"

namespace instashap {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("instashap_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file under `a` exists under `b` with identical bytes.
void ExpectSameTree(const fs::path& a, const fs::path& b) {
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(Slurp(e.path()), Slurp(b / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 0);
}

Synth10dConfig TinyBenchmark() {
  Synth10dConfig c;
  c.train_points = 300;
  c.eval_points = 20;
  c.epochs = 2;
  c.head_hidden = {16};
  return c;
}

TEST(Synth10d, ZeroEpochsRecordsInitialPointOnly) {
  Synth10dConfig c = TinyBenchmark();
  c.epochs = 0;
  for (auto m : {ExplainerMethod::kFastShap, ExplainerMethod::kInstaShap}) {
    c.method = m;
    const auto r = RunSynth10d(c);
    ASSERT_EQ(r.model_shap_mse.values.size(), 1u) << ToString(m);
    EXPECT_EQ(r.model_shap_mse.x[0], 0.0);
    EXPECT_GT(r.model_shap_mse.values[0], 0.0);
  }
}

TEST(Synth10d, FixedSeedWritesIdenticalFiles) {
  const fs::path a = TempDir("s10_a"), b = TempDir("s10_b");
  for (const auto& out : {a, b}) {
    std::vector<Synth10dResult> runs;
    for (auto m : {ExplainerMethod::kFastShap, ExplainerMethod::kInstaShap}) {
      Synth10dConfig c = TinyBenchmark();
      c.method = m;
      runs.push_back(RunSynth10d(c));
    }
    WriteSynth10dArtifacts(runs, out.string());
  }
  ExpectSameTree(a, b);
  EXPECT_TRUE(fs::exists(a / "metrics" / "fastshap_model_shap_mse.csv"));
  EXPECT_TRUE(fs::exists(a / "metrics" / "instashap_model_shap_mse.csv"));
  EXPECT_TRUE(fs::exists(a / "report.json"));
  EXPECT_TRUE(fs::exists(a / "config.json"));
}

TEST(Synth10d, RejectsOddDimension) {
  Synth10dConfig c = TinyBenchmark();
  c.d = 9;
  EXPECT_THROW(RunSynth10d(c), InvalidArgument);
}

TEST(Synth2d, RejectsInvalidRho) {
  Synth2dConfig c;
  c.rho = 1.2;
  EXPECT_THROW(RunSynth2d(c), InvalidArgument);
}

TEST(Synth2d, PerfectCorrelationIsFlagged) {
  Synth2dConfig c;
  c.rho = 1.0;
  c.train_points = 500;
  c.iterations = 10;
  c.probe_points = 100;
  c.sobol_samples = 2000;
  const auto r = RunSynth2d(c);
  EXPECT_TRUE(r.degenerate);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_TRUE(r.Summary()["degenerate_conditional"].get<bool>());
}

fs::path WriteTinyCsv(const fs::path& dir) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  const char* seasons[] = {"spring", "summer", "fall"};
  const fs::path p = dir / "tiny.csv";
  std::ofstream out(p);
  out << "temp,hour,season,cnt\n";
  for (int i = 0; i < 10; ++i) {
    const double t = u(rng);
    const int h = i * 2;
    out << t << "," << h << "," << seasons[i % 3] << "," << t * h / 10 + noise(rng) << "\n";
  }
  return p;
}

TabularConfig TinyTabular(const fs::path& csv) {
  TabularConfig c;
  c.data_path = csv.string();
  c.target = "cnt";
  c.surrogate.epochs = 5;
  c.gam.epochs = 10;
  return c;
}

TEST(Tabular, TinyCsvRunsEndToEndWithWarning) {
  const fs::path dir = TempDir("tabular");
  const auto r = RunTabular(TinyTabular(WriteTinyCsv(dir)));
  bool warned = false;
  for (const auto& w : r.warnings) warned = warned || w.find("training rows") != std::string::npos;
  EXPECT_TRUE(warned);
  EXPECT_EQ(r.report.gams.size(), 2u);
  EXPECT_EQ(r.report.metric, "nmse");
  WriteTabularArtifacts(r, (dir / "out").string());
  for (const char* f : {"report.json", "config.json", "models/gam1.json", "models/gamk.json",
                        "models/surrogate.json", "attributions/instant_shap.json",
                        "shapes/gam1_temp.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
}

TEST(Tabular, MissingTargetAndRaggedRowsAreErrors) {
  const fs::path dir = TempDir("tabular_err");
  TabularConfig c = TinyTabular(WriteTinyCsv(dir));
  c.target = "nope";
  EXPECT_THROW(RunTabular(c), InvalidArgument);
  {
    std::ofstream out(dir / "ragged.csv");
    out << "a,b,y\n1,2,3\n4,5\n";
  }
  c = TinyTabular(dir / "ragged.csv");
  c.target = "y";
  EXPECT_THROW(RunTabular(c), InvalidArgument);
}

TEST(Explain, InstantPathSpendsNoQueriesAndVanillaFallsBack) {
  const fs::path dir = TempDir("explain");
  const PairsGaussian w(2, 0.3);
  const ExactConditionalRemoval f(TwoFeatureExampleTarget(), w);
  const RowMatrix x = w.Sample(2000, 3);
  TrainConfig tc;
  tc.optimizer = OptimizerKind::kConjugateGradient;
  tc.epochs = 30;
  tc.validation_fraction = 0.0;
  const std::vector<FeatureSet> frontier = {FeatureSet(1u), FeatureSet(2u), FeatureSet(3u)};
  const auto insta = TrainGam(f, x, frontier, TrainingObjective::kInstaShap, tc);
  const auto vanilla = TrainGam(f, x, frontier, TrainingObjective::kVanilla, tc);
  WriteFileBytes((dir / "insta.json").string(), SerializeModel(insta.model));
  WriteFileBytes((dir / "vanilla.json").string(), SerializeModel(vanilla.model));
  {
    std::ofstream pts(dir / "points.csv");
    pts << "x1,x2\n0.5,-1\n1.5,0.25\n";
  }

  ExplainConfig c;
  c.model_path = (dir / "insta.json").string();
  c.points_path = (dir / "points.csv").string();
  const auto instant = RunExplain(c);
  EXPECT_EQ(instant.path, "instant");
  EXPECT_EQ(instant.model_queries, 0);
  ASSERT_EQ(instant.attributions.size(), 2u);
  EXPECT_TRUE(instant.warnings.empty());

  c.family = IndexFamily::kFaith;
  c.k = 2;
  const auto faith = RunExplain(c);
  EXPECT_EQ(faith.attributions[0].values.count(3u), 1u);

  c.family = IndexFamily::kShapley;
  c.k = 1;
  c.model_path = (dir / "vanilla.json").string();
  const auto fallback = RunExplain(c);
  EXPECT_EQ(fallback.path, "enumeration");
  EXPECT_GT(fallback.model_queries, 0);
  EXPECT_FALSE(fallback.warnings.empty());

  WriteExplainArtifacts(instant, c, (dir / "out").string());
  EXPECT_TRUE(fs::exists(dir / "out" / "attributions" / "shapley_k1.json"));
}

}  // namespace
}  // namespace instashap
