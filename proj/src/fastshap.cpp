#include "instashap/fastshap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "instashap/optim.hpp"

namespace instashap {

std::vector<FeatureSet> HeadTuples(int d, int k) {
  if (k < 1 || k > d) throw InvalidArgument("head order must lie in [1, d]");
  std::vector<FeatureSet> out;
  for (FeatureSet t : OrderFrontier(d, k)) {
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

AmortizedHead::AmortizedHead(int d, int output_dim, int k, FeatureEncoder encoder, Mlp net,
                             double scale, bool constant_head)
    : d_(d), c_(output_dim), k_(k), tuples_(HeadTuples(d, k)), encoder_(std::move(encoder)),
      net_(std::move(net)), scale_(scale), constant_head_(constant_head) {
  const int in = constant_head ? 1 : encoder_.encoded_dim();
  if (net_.spec().input_dim != in ||
      net_.spec().output_dim != static_cast<int>(tuples_.size()) * c_) {
    throw InvalidArgument("head network does not match its tuples and encoder");
  }
}

Eigen::MatrixXd AmortizedHead::Encode(const RowMatrix& x) const {
  if (x.cols() != d_) throw InvalidArgument("x dimension mismatch");
  if (constant_head_) return Eigen::MatrixXd::Zero(x.rows(), 1);
  RowMatrix enc(x.rows(), encoder_.encoded_dim());
  const FeatureSet full = FeatureSet::Full(d_);
  for (Eigen::Index i = 0; i < x.rows(); ++i) encoder_.Encode(Row(x, i), full, Row(enc, i));
  return enc;
}

RowMatrix AmortizedHead::RawBatch(const RowMatrix& x) const {
  RowMatrix out = net_.Predict(Encode(x));
  out *= scale_;
  return out;
}

namespace {

// Shifts each output's tuple values equally so they sum to the gain.
void ProjectEfficient(RowMatrix& phi, const RowMatrix& gain, int m, int c, double gain_scale) {
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    for (int o = 0; o < c; ++o) {
      double sum = 0.0;
      for (int t = 0; t < m; ++t) sum += phi(i, t * c + o);
      const double shift = (gain(i, o) * gain_scale - sum) / m;
      for (int t = 0; t < m; ++t) phi(i, t * c + o) += shift;
    }
  }
}

}  // namespace

RowMatrix AmortizedHead::ExplainBatch(const RowMatrix& x, const RowMatrix& gain) const {
  if (gain.rows() != x.rows() || gain.cols() != c_) throw InvalidArgument("gain shape mismatch");
  RowMatrix phi = RawBatch(x);
  ProjectEfficient(phi, gain, static_cast<int>(tuples_.size()), c_, 1.0);
  return phi;
}

AttributionResult AmortizedHead::Explain(const MaskedFunction& target,
                                         std::span<const double> x) const {
  if (target.num_features() != d_ || target.output_dim() != c_) {
    throw InvalidArgument("target does not match the head");
  }
  const auto full = target(x, FeatureSet::Full(d_));
  const auto empty = target(x, FeatureSet::Empty());
  RowMatrix xr(1, d_), gain(1, c_);
  for (int j = 0; j < d_; ++j) xr(0, j) = x[j];
  for (int o = 0; o < c_; ++o) gain(0, o) = full[o] - empty[o];
  const RowMatrix phi = ExplainBatch(xr, gain);
  AttributionResult r;
  r.family = k_ == 1 ? IndexFamily::kShapley : IndexFamily::kFaith;
  r.k = k_;
  r.d = d_;
  r.c = c_;
  r.base_value = empty;
  r.point.assign(x.begin(), x.end());
  for (std::size_t t = 0; t < tuples_.size(); ++t) {
    auto& v = r.values[tuples_[t].bits()];
    for (int o = 0; o < c_; ++o) v.push_back(phi(0, static_cast<Eigen::Index>(t) * c_ + o));
  }
  r.efficiency_residual.assign(static_cast<std::size_t>(c_), 0.0);
  for (const auto& [m, v] : r.values) {
    for (int o = 0; o < c_; ++o) r.efficiency_residual[o] += v[o];
  }
  for (int o = 0; o < c_; ++o) r.efficiency_residual[o] -= gain(0, o);
  r.metadata["method"] = ToString(objective());
  return r;
}

FastShapTrainResult TrainFastShap(const MaskedFunction& target, const RowMatrix& x, int k,
                                  const FastShapConfig& config,
                                  const std::vector<FeatureInfo>* features,
                                  const HeadEpochCallback& on_epoch) {
  const int d = target.num_features();
  const int c = target.output_dim();
  if (x.cols() != d || x.rows() < 1) throw InvalidArgument("x must be a non-empty n x d matrix");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate > 0.0) ||
      config.masks_per_point < 1 || !(config.lr_decay > 0.0) ||
      !(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw InvalidArgument("invalid amortized training configuration");
  }
  const std::vector<FeatureSet> tuples = HeadTuples(d, k);
  const int m = static_cast<int>(tuples.size());

  std::vector<FeatureInfo> feats;
  if (features) {
    feats = *features;
  } else {
    feats.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) feats[j].name = "x" + std::to_string(j + 1);
  }

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  int n_val = x.rows() >= 2 ? static_cast<int>(std::lround(config.validation_fraction * x.rows())) : 0;
  n_val = std::clamp(n_val, 0, static_cast<int>(x.rows()) - 1);
  std::vector<int> val(order.begin(), order.begin() + n_val);
  std::vector<int> fit(order.begin() + n_val, order.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());

  RowMatrix fx(static_cast<Eigen::Index>(fit.size()), d);
  for (std::size_t i = 0; i < fit.size(); ++i) fx.row(static_cast<Eigen::Index>(i)) = x.row(fit[i]);
  FeatureEncoder encoder(feats, fx);

  // f(x,∅) and f(x,[d]) for every row, reused by all epochs.
  RowMatrix empty_vals, full_vals;
  target.EvaluateBatch(x, FeatureSet::Empty(), empty_vals);
  target.EvaluateBatch(x, FeatureSet::Full(d), full_vals);
  const RowMatrix gains = full_vals - empty_vals;
  double ss = 0.0;
  for (int r : fit) ss += gains.row(r).squaredNorm();
  double scale = std::sqrt(ss / static_cast<double>(fit.size() * c));
  if (!std::isfinite(scale)) throw NumericalError("target values are non-finite");
  if (scale < 1e-12) scale = 1.0;

  MlpSpec spec{config.constant_head ? 1 : encoder.encoded_dim(),
               config.constant_head ? std::vector<int>{} : config.hidden, m * c};
  Mlp net(spec, config.seed + 1);
  Adam adam(net.num_params(), config.learning_rate);
  const MaskSampler sampler(d, config.masks, config.anchor_probability);

  auto snapshot = [&]() { return AmortizedHead(d, c, k, encoder, net, scale, config.constant_head); };

  // Scaled loss and output gradient for a batch of (row, mask, f(x,S)).
  auto batch_loss = [&](const Eigen::MatrixXd& raw, const std::vector<int>& rows,
                        std::span<const FeatureSet> masks, const RowMatrix& fs,
                        Eigen::MatrixXd* grad) {
    RowMatrix phi = raw;
    RowMatrix g(static_cast<Eigen::Index>(rows.size()), c);
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = gains.row(rows[i]);
    ProjectEfficient(phi, g, m, c, 1.0 / scale);
    const double inv_b = 1.0 / static_cast<double>(rows.size());
    if (grad) grad->setZero(raw.rows(), raw.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (int o = 0; o < c; ++o) {
        double pred = 0.0;
        for (int t = 0; t < m; ++t) {
          if (tuples[t].is_subset_of(masks[i])) pred += phi(r, t * c + o);
        }
        const double delta = (fs(r, o) - empty_vals(rows[i], o)) / scale;
        const double res = pred - delta;
        loss += res * res / c;
        if (!grad) continue;
        // Gradient through the equal-shift projection: subtract the mean.
        const double go = 2.0 * res / c * inv_b;
        int inside = 0;
        for (int t = 0; t < m; ++t) inside += tuples[t].is_subset_of(masks[i]) ? 1 : 0;
        const double mean = go * inside / m;
        for (int t = 0; t < m; ++t) {
          (*grad)(r, t * c + o) = (tuples[t].is_subset_of(masks[i]) ? go : 0.0) - mean;
        }
      }
    }
    return loss * inv_b;
  };

  RowMatrix vx(static_cast<Eigen::Index>(val.size()), d);
  for (std::size_t i = 0; i < val.size(); ++i) vx.row(static_cast<Eigen::Index>(i)) = x.row(val[i]);
  std::vector<FeatureSet> vmasks(val.size());
  std::mt19937_64 vrng(config.seed + 2);
  for (auto& s : vmasks) s = sampler(vrng);
  RowMatrix vf;
  if (!val.empty()) target.EvaluateMasked(vx, vmasks, vf);
  const Eigen::MatrixXd venc = val.empty() ? Eigen::MatrixXd() : snapshot().Encode(vx);

  FastShapTrainResult result;
  if (on_epoch) on_epoch(0, snapshot());
  std::vector<int> stream;
  for (int rep = 0; rep < config.masks_per_point; ++rep) stream.insert(stream.end(), fit.begin(), fit.end());
  std::vector<double> best_params(net.params().begin(), net.params().end());
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  double lr = config.learning_rate;
  const AmortizedHead encoder_view = snapshot();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(stream.begin(), stream.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < stream.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(stream.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<int> rows(stream.begin() + static_cast<std::ptrdiff_t>(start),
                            stream.begin() + static_cast<std::ptrdiff_t>(end));
      RowMatrix bx(static_cast<Eigen::Index>(rows.size()), d);
      std::vector<FeatureSet> masks(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
        masks[i] = sampler(rng);
      }
      RowMatrix fs;
      target.EvaluateMasked(bx, masks, fs);
      net.ZeroGrad();
      const Eigen::MatrixXd& raw = net.Forward(encoder_view.Encode(bx));
      Eigen::MatrixXd grad;
      const double loss = batch_loss(raw, rows, masks, fs, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("amortized training diverged at epoch " + std::to_string(epoch));
      }
      total += loss * static_cast<double>(rows.size());
      net.Backward(grad);
      adam.Step(net.params(), net.grads());
    }
    result.train_loss.push_back(total / static_cast<double>(stream.size()) * scale * scale);
    lr *= config.lr_decay;
    adam.set_learning_rate(lr);
    if (!val.empty()) {
      const double vl = batch_loss(net.Predict(venc), val, vmasks, vf, nullptr) * scale * scale;
      if (!std::isfinite(vl)) throw NumericalError("amortized validation loss is non-finite");
      result.validation_loss.push_back(vl);
      if (vl < best) {
        best = vl;
        best_params.assign(net.params().begin(), net.params().end());
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (on_epoch) on_epoch(epoch, snapshot());
    if (config.patience > 0 && since_best >= config.patience) break;
  }
  if (!val.empty() && result.best_epoch > 0) net.SetParams(best_params);
  if (result.best_epoch < 0) result.best_epoch = static_cast<int>(result.train_loss.size());
  result.head = snapshot();
  return result;
}

}  // namespace instashap
