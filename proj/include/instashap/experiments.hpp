#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "instashap/anova.hpp"
#include "instashap/eval.hpp"
#include "instashap/fastshap.hpp"
#include "instashap/gam.hpp"
#include "instashap/masking.hpp"
#include "instashap/synthetic.hpp"

namespace instashap {

// Creates out/ with metrics/, shapes/, attributions/ and models/ below it.
void PrepareOutputDir(const std::string& out);

// ---- two-feature world: f = x + xy on correlated Gaussian pairs ----

struct Synth2dConfig {
  double rho = 0.5;
  // Grid points per axis on [-grid_range, grid_range].
  int grid = 41;
  double grid_range = 2.0;
  int train_points = 40000;
  int iterations = 400;
  int masks_per_point = 8;
  double smoothness = 1e-2;
  int probe_points = 5000;
  long sobol_samples = 200000;
  std::uint64_t seed = 3;

  void Validate() const;
  nlohmann::json ToJson() const;
};

struct ComponentError {
  std::string name;
  // Grid mean squared error with points weighted by the input density
  // (uniform when the density is singular), the unweighted grid value, and the
  // root mean squared error over samples of the data distribution.
  double grid_mse = 0.0;
  double uniform_grid_mse = 0.0;
  double density_rmse = 0.0;
};

struct Synth2dResult {
  Synth2dConfig config;
  AdditiveModel model;
  std::vector<double> train_loss;
  // f1, f2, f12 against the exact purified components, then shap_x, shap_y
  // of the instant path against exact Shapley values.
  std::vector<ComponentError> errors;
  double max_purified_grid_mse = 0.0;
  double max_component_density_rmse = 0.0;
  SobolReport sobol;
  // max_S |V_S - C_S| / sqrt(se(V_S)^2 + se(C_S)^2).
  double max_variance_covariance_z = 0.0;
  bool degenerate = false;
  std::vector<std::string> warnings;

  // Grid rows: x, y, exact and learned f1, f2, f12, exact and instant phi_x, phi_y.
  RowMatrix grid;

  nlohmann::json Summary() const;
};

Synth2dResult RunSynth2d(const Synth2dConfig& config);
void WriteSynth2dArtifacts(const Synth2dResult& result, const std::string& out);

// ---- d-feature benchmark with multilinear targets ----

enum class ExplainerMethod { kFastShap, kInstaShap };
std::string ToString(ExplainerMethod m);
ExplainerMethod ParseExplainerMethod(const std::string& name);

enum class BenchmarkTarget {
  // The closed-form conditional expectation of the synthetic target.
  kExactOracle,
  // A masked network trained on samples; explanations are compared with its
  // own exact Shapley values and with those of the exact oracle.
  kSurrogate,
};
std::string ToString(BenchmarkTarget t);
BenchmarkTarget ParseBenchmarkTarget(const std::string& name);

struct Synth10dConfig {
  int d = 10;
  double rho = 0.5;
  int kstar = 1;
  CoefficientDistribution dist = CoefficientDistribution::kNormal;
  ExplainerMethod method = ExplainerMethod::kInstaShap;
  BenchmarkTarget target = BenchmarkTarget::kExactOracle;
  int epochs = 30;
  int train_points = 50000;
  int eval_points = 10000;
  int batch_size = 256;
  // Adam step sizes; both methods see the same data, masks and epochs.
  double gam_learning_rate = 1e-2;
  double head_learning_rate = 3e-3;
  // Learning rate multiplier applied after every epoch, for both methods.
  double lr_decay = 1.0;
  OptimizerKind gam_optimizer = OptimizerKind::kAdam;
  // Coarse high-order tensors: the benchmark components are low-degree
  // polynomials, and finer grids leave most cells without data.
  BasisOptions basis{{16, 8, 4, 3}};
  int masks_per_point = 4;
  std::vector<int> head_hidden = {128, 128};
  int surrogate_epochs = 50;
  std::uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
};

struct Synth10dResult {
  Synth10dConfig config;
  // Per epoch, starting at the untrained explainer.
  MetricSeries model_shap_mse;
  MetricSeries model_shap_nmse;
  MetricSeries true_shap_mse;
  MetricSeries train_loss;
  std::size_t num_params = 0;
  double seconds = 0.0;
  AdditiveModel gam;     // InstaSHAP runs
  AmortizedHead head;    // FastSHAP runs

  nlohmann::json Summary() const;
};

// Pair blocks touched by at most k* of a degree-k* target: the frontier on
// which the conditional game is exactly additive.
std::vector<FeatureSet> BenchmarkFrontier(int d, int kstar);

Synth10dResult RunSynth10d(const Synth10dConfig& config);
// One or more runs on the same benchmark (typically one per method); the
// report compares their final model-SHAP errors.
void WriteSynth10dArtifacts(const std::vector<Synth10dResult>& runs, const std::string& out);

// ---- tabular workflow ----

struct TabularConfig {
  std::string data_path;
  std::string target;
  Task task = Task::kRegression;
  std::set<std::string> categorical;
  std::set<std::string> drop;
  // Seeded subsample before splitting; 0 keeps every row.
  int max_rows = 0;
  double train_fraction = 0.8;
  int max_order = 3;
  // Interaction tuples accepted per selection round.
  int tuples = 5;
  SurrogateConfig surrogate;
  TrainConfig gam;
  int explain_points = 20;
  double margin = 0.1;
  std::uint64_t seed = 0;

  TabularConfig();
  void Validate() const;
  nlohmann::json ToJson() const;
};

struct TabularResult {
  TabularConfig config;
  Dataset train;
  Dataset test;
  SurrogateModel surrogate;
  SurrogateModel reference;
  AdditiveModel gam1;
  AdditiveModel gamk;
  FrontierSelection selection;
  TrustGapReport report;
  double surrogate_score = 0.0;
  MetricSeries gam1_loss;
  MetricSeries gamk_loss;
  std::vector<AttributionResult> attributions;
  std::vector<std::string> warnings;

  nlohmann::json Summary() const;
};

TabularResult RunTabular(const TabularConfig& config);
void WriteTabularArtifacts(const TabularResult& result, const std::string& out);

// ---- explaining stored models ----

struct ExplainConfig {
  std::string model_path;
  std::string points_path;
  IndexFamily family = IndexFamily::kShapley;
  int k = 1;
  // Required for amortized heads: the model whose gain they distribute.
  std::string target_path;
};

struct ExplainResult {
  std::vector<AttributionResult> attributions;
  std::vector<std::string> feature_names;
  // "instant", "enumeration" or "amortized".
  std::string path;
  // Masked-function evaluations spent on the explained model.
  long model_queries = 0;
  std::vector<std::string> warnings;

  nlohmann::json Summary() const;
};

ExplainResult RunExplain(const ExplainConfig& config);
void WriteExplainArtifacts(const ExplainResult& result, const ExplainConfig& config,
                           const std::string& out);

}  // namespace instashap
