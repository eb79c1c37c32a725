#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "instashap/dataset.hpp"
#include "instashap/gam.hpp"
#include "instashap/indices.hpp"
#include "instashap/masking.hpp"
#include "instashap/mlp.hpp"

namespace instashap {

struct FastShapConfig {
  std::vector<int> hidden = {128, 128};
  // Ignore x entirely: the head learns one attribution vector for all points.
  bool constant_head = false;
  int epochs = 50;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double lr_decay = 1.0;
  MaskSampling masks = MaskSampling::kKernelAnchored;
  double anchor_probability = 0.05;
  int masks_per_point = 1;
  double validation_fraction = 0.1;
  int patience = 0;
  std::uint64_t seed = 0;
};

// Amortized explainer: a network mapping x to one value per tuple |T| <= k and
// output, shifted at evaluation so that the values sum to f(x,[d]) - f(x,∅).
class AmortizedHead {
 public:
  AmortizedHead() = default;
  AmortizedHead(int d, int output_dim, int k, FeatureEncoder encoder, Mlp net, double scale,
                bool constant_head);

  int num_features() const { return d_; }
  int output_dim() const { return c_; }
  int order() const { return k_; }
  TrainingObjective objective() const {
    return k_ == 1 ? TrainingObjective::kFastShap : TrainingObjective::kFastFaith;
  }
  const std::vector<FeatureSet>& tuples() const { return tuples_; }
  const FeatureEncoder& encoder() const { return encoder_; }
  const Mlp& net() const { return net_; }
  double scale() const { return scale_; }
  bool constant_head() const { return constant_head_; }

  // Row i: tuple-major values (tuple t, output o at t * c + o) before the
  // efficiency shift, in target units.
  RowMatrix RawBatch(const RowMatrix& x) const;
  // Same after shifting each row to sum to gain(i, o) per output.
  RowMatrix ExplainBatch(const RowMatrix& x, const RowMatrix& gain) const;
  // Queries target at S = [d] and S = ∅ for the gain.
  AttributionResult Explain(const MaskedFunction& target, std::span<const double> x) const;

  Eigen::MatrixXd Encode(const RowMatrix& x) const;

 private:
  int d_ = 0;
  int c_ = 1;
  int k_ = 1;
  std::vector<FeatureSet> tuples_;
  FeatureEncoder encoder_;
  Mlp net_;
  double scale_ = 1.0;
  bool constant_head_ = false;
};

// Tuples 1 <= |T| <= k ordered by (size, bitmask).
std::vector<FeatureSet> HeadTuples(int d, int k);

struct FastShapTrainResult {
  AmortizedHead head;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
};

using HeadEpochCallback = std::function<void(int epoch, const AmortizedHead& head)>;

// Minimizes E_{x,S} |f(x,S) - f(x,∅) - Σ_{T⊆S} φ_T(x)|^2 over the network
// weights, with S drawn as for the masked GAM objective.
FastShapTrainResult TrainFastShap(const MaskedFunction& target, const RowMatrix& x, int k,
                                  const FastShapConfig& config,
                                  const std::vector<FeatureInfo>* features = nullptr,
                                  const HeadEpochCallback& on_epoch = {});

}  // namespace instashap
