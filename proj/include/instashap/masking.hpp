#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "instashap/dataset.hpp"
#include "instashap/feature_set.hpp"
#include "instashap/mlp.hpp"
#include "instashap/set_function.hpp"
#include "instashap/synthetic.hpp"
#include "instashap/types.hpp"

namespace instashap {

enum class RemovalMode {
  kBaseline,
  kMarginal,
  kConditionalExact,
  kConditionalMonteCarlo,
  kConditionalSurrogate,
  kTable,
  kModel,
};

std::string ToString(RemovalMode mode);

// f(x, S): a model with some features removed. Implementations must be safe to
// call concurrently.
class MaskedFunction {
 public:
  virtual ~MaskedFunction() = default;

  virtual int num_features() const = 0;
  virtual int output_dim() const = 0;
  virtual RemovalMode mode() const = 0;
  virtual void Evaluate(std::span<const double> x, FeatureSet s,
                        std::span<double> out) const = 0;

  // Row i of `out` receives f(x_i, masks[i]). The default loops over Evaluate.
  virtual void EvaluateMasked(const RowMatrix& x, std::span<const FeatureSet> masks,
                              RowMatrix& out) const;
  // Same mask for every row.
  void EvaluateBatch(const RowMatrix& x, FeatureSet s, RowMatrix& out) const;

  std::vector<double> operator()(std::span<const double> x, FeatureSet s) const;

  // f(x, S) for every S ⊆ [d] at one point.
  SetFunctionTable Table(std::span<const double> x) const;
};

// The unmasked model F: R^d -> R^c.
struct FullModel {
  int d = 0;
  int c = 1;
  std::function<void(std::span<const double>, std::span<double>)> fn;

  std::vector<double> operator()(std::span<const double> x) const {
    std::vector<double> out(static_cast<std::size_t>(c));
    fn(x, out);
    return out;
  }
};

FullModel ModelOfTarget(const MultilinearTarget& target);

// f(x, S) = F(x_S, xbar_{-S}).
class BaselineRemoval final : public MaskedFunction {
 public:
  BaselineRemoval(FullModel model, std::vector<double> baseline);
  int num_features() const override { return model_.d; }
  int output_dim() const override { return model_.c; }
  RemovalMode mode() const override { return RemovalMode::kBaseline; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override;

 private:
  FullModel model_;
  std::vector<double> baseline_;
};

// f(x, S) = mean_j F(x_S, Xbar^(j)_{-S}) over m background draws fixed at
// construction, so repeated queries are deterministic.
class MarginalRemoval final : public MaskedFunction {
 public:
  using Sampler = std::function<void(std::mt19937_64&, std::span<double>)>;
  MarginalRemoval(FullModel model, const Sampler& sampler, int m, std::uint64_t seed);
  MarginalRemoval(FullModel model, RowMatrix background);

  int num_features() const override { return model_.d; }
  int output_dim() const override { return model_.c; }
  RemovalMode mode() const override { return RemovalMode::kMarginal; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override;
  // Also writes the standard error of each output.
  void EvaluateWithError(std::span<const double> x, FeatureSet s,
                         std::span<double> out, std::span<double> se) const;

 private:
  FullModel model_;
  RowMatrix background_;
};

// Closed-form conditional expectation for a multilinear target in the pairs
// world.
class ExactConditionalRemoval final : public MaskedFunction {
 public:
  ExactConditionalRemoval(MultilinearTarget target, PairsGaussian world);
  int num_features() const override { return target_.num_features(); }
  int output_dim() const override { return 1; }
  RemovalMode mode() const override { return RemovalMode::kConditionalExact; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override;

  const MultilinearTarget& target() const { return target_; }
  const PairsGaussian& world() const { return world_; }

 private:
  MultilinearTarget target_;
  PairsGaussian world_;
};

// Conditional expectation estimated by sampling X_{-S} | X_S in the pairs
// world. Each query reseeds from (seed, S) so results are reproducible.
class MonteCarloConditionalRemoval final : public MaskedFunction {
 public:
  MonteCarloConditionalRemoval(FullModel model, PairsGaussian world, int m,
                               std::uint64_t seed);
  int num_features() const override { return model_.d; }
  int output_dim() const override { return model_.c; }
  RemovalMode mode() const override { return RemovalMode::kConditionalMonteCarlo; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override;
  void EvaluateWithError(std::span<const double> x, FeatureSet s,
                         std::span<double> out, std::span<double> se) const;

 private:
  FullModel model_;
  PairsGaussian world_;
  int m_;
  std::uint64_t seed_;
};

// A cooperative game given by a table; x is ignored.
class TableGame final : public MaskedFunction {
 public:
  explicit TableGame(SetFunctionTable table) : table_(std::move(table)) {}
  int num_features() const override { return table_.num_features(); }
  int output_dim() const override { return table_.output_dim(); }
  RemovalMode mode() const override { return RemovalMode::kTable; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override;
  const SetFunctionTable& table() const { return table_; }

 private:
  SetFunctionTable table_;
};

// Arbitrary callable f(x, S, out).
class LambdaMaskedFunction final : public MaskedFunction {
 public:
  using Fn = std::function<void(std::span<const double>, FeatureSet, std::span<double>)>;
  LambdaMaskedFunction(int d, int c, RemovalMode mode, Fn fn)
      : d_(d), c_(c), mode_(mode), fn_(std::move(fn)) {}
  int num_features() const override { return d_; }
  int output_dim() const override { return c_; }
  RemovalMode mode() const override { return mode_; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override {
    fn_(x, s, out);
  }

 private:
  int d_;
  int c_;
  RemovalMode mode_;
  Fn fn_;
};

// Forwards to another masked function and counts point queries.
class CountingMaskedFunction final : public MaskedFunction {
 public:
  explicit CountingMaskedFunction(const MaskedFunction& inner) : inner_(inner) {}
  int num_features() const override { return inner_.num_features(); }
  int output_dim() const override { return inner_.output_dim(); }
  RemovalMode mode() const override { return inner_.mode(); }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override;
  void EvaluateMasked(const RowMatrix& x, std::span<const FeatureSet> masks,
                      RowMatrix& out) const override;
  long queries() const { return queries_.load(); }
  void Reset() { queries_ = 0; }

 private:
  const MaskedFunction& inner_;
  mutable std::atomic<long> queries_{0};
};

struct SurrogateConfig {
  std::vector<int> hidden = {128, 128};
  int epochs = 50;
  int batch_size = 256;
  double learning_rate = 1e-3;
  // Fraction of the training rows held out for checkpoint selection.
  double validation_fraction = 0.1;
  int patience = 10;
  std::uint64_t seed = 0;
};

// Per-feature input encoding shared by the surrogate and the reference model:
// standardized continuous values (0 when masked) or one-hot categories with an
// extra "masked" slot, followed by the d mask bits.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  FeatureEncoder(const std::vector<FeatureInfo>& features, const RowMatrix& x);

  int num_features() const { return static_cast<int>(features_.size()); }
  int encoded_dim() const { return width_ + num_features(); }
  void Encode(std::span<const double> x, FeatureSet s, std::span<double> out) const;

  const std::vector<FeatureInfo>& features() const { return features_; }
  const std::vector<double>& means() const { return mean_; }
  const std::vector<double>& scales() const { return scale_; }
  static FeatureEncoder FromParts(std::vector<FeatureInfo> features,
                                  std::vector<double> means,
                                  std::vector<double> scales);

 private:
  void Layout();

  std::vector<FeatureInfo> features_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<int> offset_;
  int width_ = 0;
};

// A network g(x_S, S) trained to approximate E[y | x_S]. Regression outputs are
// on the label scale; classification outputs are log-probabilities.
class SurrogateModel final : public MaskedFunction {
 public:
  SurrogateModel() = default;

  int num_features() const override { return encoder_.num_features(); }
  int output_dim() const override { return output_dim_; }
  RemovalMode mode() const override { return RemovalMode::kConditionalSurrogate; }
  void Evaluate(std::span<const double> x, FeatureSet s,
                std::span<double> out) const override;
  void EvaluateMasked(const RowMatrix& x, std::span<const FeatureSet> masks,
                      RowMatrix& out) const override;

  bool trained() const { return trained_; }
  Task task() const { return task_; }
  const std::vector<double>& train_loss() const { return train_loss_; }
  const std::vector<double>& validation_loss() const { return val_loss_; }
  // Best validation loss seen up to each epoch.
  std::vector<double> best_validation_loss() const;
  int best_epoch() const { return best_epoch_; }

  // Unmasked predictions; classification returns class probabilities.
  RowMatrix PredictFull(const RowMatrix& x) const;
  FullModel AsFullModel() const;

  const FeatureEncoder& encoder() const { return encoder_; }
  const Mlp& net() const { return net_; }
  double y_mean() const { return y_mean_; }
  double y_scale() const { return y_scale_; }
  // Rebuilds a trained surrogate from stored parts (checkpoint loading).
  static SurrogateModel Restore(FeatureEncoder encoder, Mlp net, Task task,
                                int output_dim, double y_mean, double y_scale);

 private:
  friend SurrogateModel TrainSurrogate(const Dataset&, const WeightTable&,
                                       const SurrogateConfig&);
  Eigen::MatrixXd EncodeBatch(const RowMatrix& x,
                              std::span<const FeatureSet> masks) const;
  void Postprocess(Eigen::MatrixXd& raw) const;

  FeatureEncoder encoder_;
  Mlp net_;
  Task task_ = Task::kRegression;
  int output_dim_ = 1;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  bool trained_ = false;
  std::vector<double> train_loss_;
  std::vector<double> val_loss_;
  int best_epoch_ = -1;
};

// Minimizes E_{x,S}[loss(y, g(x_S, S))] with S ~ mask_dist. Throws
// NumericalError if the loss becomes non-finite.
SurrogateModel TrainSurrogate(const Dataset& data, const WeightTable& mask_dist,
                              const SurrogateConfig& config);

}  // namespace instashap
