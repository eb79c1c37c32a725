#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "instashap/dataset.hpp"
#include "instashap/feature_set.hpp"
#include "instashap/indices.hpp"
#include "instashap/masking.hpp"
#include "instashap/set_function.hpp"
#include "instashap/types.hpp"

namespace instashap {

enum class TrainingObjective { kVanilla, kInstaShap, kFastShap, kFastFaith };
std::string ToString(TrainingObjective objective);
TrainingObjective ParseTrainingObjective(const std::string& name);

// Sorted knots for a piecewise-linear axis: the sample extremes plus evenly
// spaced quantiles of an even mix of the sample distribution and a uniform on
// its central 99.8%. Columns with at most `max_knots` distinct values use those
// values directly.
std::vector<double> MakeKnots(std::span<const double> values, int max_knots);

// One coordinate of a tensor basis: hat functions on knots (clamped outside
// the knot range) or one-hot over categorical levels.
struct AxisBasis {
  int feature = 0;
  FeatureKind kind = FeatureKind::kContinuous;
  std::vector<double> knots;
  int levels = 0;

  int size() const {
    return kind == FeatureKind::kCategorical ? levels : static_cast<int>(knots.size());
  }
  // Active basis functions at v: writes up to two (index, weight) pairs.
  int Weights(double v, int idx[2], double w[2]) const;
};

// φ_T(x_T) as a tensor product of axis bases with c outputs per cell.
class ShapeFunction {
 public:
  ShapeFunction() = default;
  ShapeFunction(FeatureSet subset, std::vector<AxisBasis> axes, int output_dim);

  FeatureSet subset() const { return subset_; }
  const std::vector<AxisBasis>& axes() const { return axes_; }
  int output_dim() const { return c_; }
  std::size_t num_cells() const { return cells_; }
  std::vector<double>& coefficients() { return coef_; }
  const std::vector<double>& coefficients() const { return coef_; }

  // fn(cell, weight) for every tensor cell with non-zero weight at x, where x
  // is a full-length point.
  template <class Fn>
  void ForEachCell(std::span<const double> x, Fn&& fn) const;

  // out += φ_T(x_T).
  void AddTo(std::span<const double> x, std::span<double> out) const;
  std::vector<double> operator()(std::span<const double> x) const;

 private:
  FeatureSet subset_;
  std::vector<AxisBasis> axes_;
  std::vector<std::size_t> stride_;
  std::size_t cells_ = 0;
  int c_ = 1;
  std::vector<double> coef_;
};

// f_∅ + Σ_T φ_T(x_T) over a frontier of subsets.
class AdditiveModel {
 public:
  AdditiveModel() = default;
  AdditiveModel(int d, std::vector<double> intercept, std::vector<ShapeFunction> shapes,
                TrainingObjective objective);

  int num_features() const { return d_; }
  int output_dim() const { return static_cast<int>(intercept_.size()); }
  TrainingObjective objective() const { return objective_; }
  void set_objective(TrainingObjective o) { objective_ = o; }

  std::vector<double>& intercept() { return intercept_; }
  const std::vector<double>& intercept() const { return intercept_; }
  std::vector<ShapeFunction>& shapes() { return shapes_; }
  const std::vector<ShapeFunction>& shapes() const { return shapes_; }
  // ∅ followed by the shape subsets in storage order.
  std::vector<FeatureSet> frontier() const;
  const ShapeFunction* Find(FeatureSet t) const;
  std::size_t num_params() const;

  void Predict(std::span<const double> x, std::span<double> out) const;
  std::vector<double> Predict(std::span<const double> x) const;
  // Only shapes with T ⊆ S contribute; the intercept always does.
  void PredictMasked(std::span<const double> x, FeatureSet s, std::span<double> out) const;
  RowMatrix PredictBatch(const RowMatrix& x) const;

  // Dataset context carried into exports.
  std::vector<FeatureInfo> features;
  Task task = Task::kRegression;
  std::vector<std::string> class_names;
  std::map<std::string, std::string> metadata;

 private:
  int d_ = 0;
  std::vector<double> intercept_;
  std::vector<ShapeFunction> shapes_;
  TrainingObjective objective_ = TrainingObjective::kVanilla;
};

// The model's own masked game f(x, S) = gam_predict_masked(x, S).
class GamMaskedFunction final : public MaskedFunction {
 public:
  explicit GamMaskedFunction(const AdditiveModel& model) : model_(model) {}
  int num_features() const override { return model_.num_features(); }
  int output_dim() const override { return model_.output_dim(); }
  RemovalMode mode() const override { return RemovalMode::kModel; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override {
    model_.PredictMasked(x, s, out);
  }

 private:
  const AdditiveModel& model_;
};

struct BasisOptions {
  // Knots per continuous axis for shapes of order 1, 2, 3, 4.
  std::vector<int> knots_by_order = {32, 32, 16, 8};
};
inline constexpr int kMaxShapeOrder = 4;

// Adds ∅ if absent, drops duplicates, orders by (size, bitmask). Throws on an
// empty input, sets outside [d], or sets larger than kMaxShapeOrder.
std::vector<FeatureSet> NormalizeFrontier(const std::vector<FeatureSet>& frontier, int d);

// All-zero model over the frontier with bases fitted to the columns of x.
AdditiveModel BuildAdditiveModel(const std::vector<FeatureSet>& frontier, const RowMatrix& x,
                                 const std::vector<FeatureInfo>& features, int output_dim,
                                 const BasisOptions& basis = {});

// All subsets of size ≤ max_order of every union of at most `blocks`
// consecutive feature pairs {1,2},{3,4},...; includes ∅.
std::vector<FeatureSet> PairBlockFrontier(int d, int blocks, int max_order = kMaxShapeOrder);
// All subsets of size ≤ k.
std::vector<FeatureSet> OrderFrontier(int d, int k);

// kConjugateGradient solves the squared-loss objective over a fixed draw of
// masks_per_point masks per row with Jacobi-preconditioned CG; one iteration
// counts as one epoch and the learning rate is unused.
enum class OptimizerKind { kAdam, kSgd, kConjugateGradient };
std::string ToString(OptimizerKind kind);
OptimizerKind ParseOptimizerKind(const std::string& name);
enum class MaskSampling {
  // Kernel-distributed sizes, with anchor mass on S = [d] and S = ∅.
  kKernelAnchored,
  kShapUniform,
  kFullOnly,
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 256;
  double learning_rate = 1e-2;
  // Learning rate multiplier applied after every epoch.
  double lr_decay = 1.0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  MaskSampling masks = MaskSampling::kKernelAnchored;
  double anchor_probability = 0.05;
  // Masks drawn per training row per epoch.
  int masks_per_point = 1;
  std::uint64_t seed = 0;
  // Epochs without validation improvement before stopping; 0 disables.
  int patience = 0;
  // Per-shape penalty on the mean squared coefficient.
  double ridge = 1e-5;
  // Per-shape penalty on the mean squared slope change along each continuous
  // axis; zero for functions linear in every axis.
  double smoothness = 1e-2;
  double validation_fraction = 0.1;

  void Validate() const;
};

// Draws masks for the masked objectives.
class MaskSampler {
 public:
  MaskSampler(int d, MaskSampling kind, double anchor_probability);
  FeatureSet operator()(std::mt19937_64& rng) const;

 private:
  int d_;
  MaskSampling kind_;
  double anchor_;
  std::vector<double> size_mass_;
};

struct GamTrainResult {
  AdditiveModel model;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
};

// Called with epoch 0 before any update and after every epoch e >= 1.
using GamEpochCallback = std::function<void(int epoch, const AdditiveModel& model)>;

// Regresses masked predictions on target(x, S). The vanilla objective always
// uses S = [d]; the InstaSHAP objective samples S per `config.masks` and freezes
// the intercept at the mean of target(x, ∅). `features` defaults to all
// continuous.
GamTrainResult TrainGam(const MaskedFunction& target, const RowMatrix& x,
                        const std::vector<FeatureSet>& frontier, TrainingObjective objective,
                        const TrainConfig& config,
                        const std::vector<FeatureInfo>* features = nullptr,
                        const GamEpochCallback& on_epoch = {},
                        const BasisOptions& basis = {});

// Vanilla fit directly to labels: squared error for regression, cross-entropy
// on logits for classification.
GamTrainResult TrainGamOnLabels(const Dataset& data, const std::vector<FeatureSet>& frontier,
                                const TrainConfig& config, const GamEpochCallback& on_epoch = {},
                                const BasisOptions& basis = {});

// Reads the shapes of an InstaSHAP-trained model as purified components and
// returns order-k indices of `family` in one pass over the frontier. Throws
// InvalidArgument for models trained with another objective.
AttributionResult InstantShap(const AdditiveModel& model, std::span<const double> x,
                              IndexFamily family = IndexFamily::kShapley, int k = 1);

enum class InteractionScorer { kArchipelago, kInclusion };
InteractionScorer ParseInteractionScorer(const std::string& name);

struct FrontierSelectionConfig {
  int rounds = 1;
  int per_round = 5;
  // Minimum fraction of a candidate's (|J|-1)-subsets already in the frontier.
  double inclusion_threshold = 1.0;
  InteractionScorer scorer = InteractionScorer::kArchipelago;
  int max_order = 3;
  int max_points = 256;
  double min_score = 1e-9;
  std::uint64_t seed = 0;
};

struct FrontierCandidate {
  FeatureSet set;
  double score = 0.0;
  int round = 0;
};

struct FrontierSelection {
  std::vector<FeatureSet> frontier;
  std::vector<FrontierCandidate> accepted;
};

// Greedy growth from {∅} ∪ singletons. Each round scores one-element
// extensions of current sets by |Cov(residual, scorer_J)|, where the residual is
// f(x,[d]) minus the pointwise Möbius terms already in the frontier, and keeps
// the best `per_round`.
FrontierSelection SelectFrontier(const MaskedFunction& target, const RowMatrix& x,
                                 const FrontierSelectionConfig& config);

// ---- inline ----

template <class Fn>
void ShapeFunction::ForEachCell(std::span<const double> x, Fn&& fn) const {
  const int m = static_cast<int>(axes_.size());
  int idx[kMaxShapeOrder][2];
  double w[kMaxShapeOrder][2];
  int count[kMaxShapeOrder];
  for (int a = 0; a < m; ++a) {
    count[a] = axes_[a].Weights(x[axes_[a].feature], idx[a], w[a]);
  }
  int pick[kMaxShapeOrder] = {0, 0, 0, 0};
  while (true) {
    std::size_t cell = 0;
    double weight = 1.0;
    for (int a = 0; a < m; ++a) {
      cell += static_cast<std::size_t>(idx[a][pick[a]]) * stride_[a];
      weight *= w[a][pick[a]];
    }
    if (weight != 0.0) fn(cell, weight);
    int a = 0;
    while (a < m && ++pick[a] == count[a]) pick[a++] = 0;
    if (a == m) break;
  }
}

}  // namespace instashap
