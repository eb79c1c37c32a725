#include "instashap/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "instashap/optim.hpp"
#include "instashap/parallel.hpp"

namespace instashap {

std::string ToString(RemovalMode mode) {
  switch (mode) {
    case RemovalMode::kBaseline: return "baseline";
    case RemovalMode::kMarginal: return "marginal";
    case RemovalMode::kConditionalExact: return "conditional-exact";
    case RemovalMode::kConditionalMonteCarlo: return "conditional-mc";
    case RemovalMode::kConditionalSurrogate: return "conditional-surrogate";
    case RemovalMode::kTable: return "table";
    case RemovalMode::kModel: return "model";
  }
  return "unknown";
}

void MaskedFunction::EvaluateMasked(const RowMatrix& x,
                                    std::span<const FeatureSet> masks,
                                    RowMatrix& out) const {
  if (static_cast<std::size_t>(x.rows()) != masks.size()) {
    throw InvalidArgument("one mask per row required");
  }
  out.resize(x.rows(), output_dim());
  ParallelFor(static_cast<std::size_t>(x.rows()), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      Evaluate(Row(x, r), masks[i], Row(out, r));
    }
  });
}

void MaskedFunction::EvaluateBatch(const RowMatrix& x, FeatureSet s,
                                   RowMatrix& out) const {
  std::vector<FeatureSet> masks(static_cast<std::size_t>(x.rows()), s);
  EvaluateMasked(x, masks, out);
}

std::vector<double> MaskedFunction::operator()(std::span<const double> x,
                                               FeatureSet s) const {
  std::vector<double> out(static_cast<std::size_t>(output_dim()));
  Evaluate(x, s, out);
  return out;
}

SetFunctionTable MaskedFunction::Table(std::span<const double> x) const {
  const int d = num_features();
  CheckExhaustive(d);
  const std::size_t n = std::size_t{1} << d;
  RowMatrix xs(static_cast<Eigen::Index>(n), d);
  std::vector<FeatureSet> masks(n);
  for (std::size_t m = 0; m < n; ++m) {
    std::copy(x.begin(), x.end(), Row(xs, static_cast<Eigen::Index>(m)).begin());
    masks[m] = FeatureSet(static_cast<std::uint32_t>(m));
  }
  RowMatrix values;
  EvaluateMasked(xs, masks, values);
  SetFunctionTable table(d, output_dim());
  std::copy(values.data(), values.data() + values.size(), table.raw().begin());
  return table;
}

FullModel ModelOfTarget(const MultilinearTarget& target) {
  return {target.num_features(), 1,
          [target](std::span<const double> x, std::span<double> out) {
            out[0] = target.Evaluate(x);
          }};
}

BaselineRemoval::BaselineRemoval(FullModel model, std::vector<double> baseline)
    : model_(std::move(model)), baseline_(std::move(baseline)) {
  if (static_cast<int>(baseline_.size()) != model_.d) {
    throw InvalidArgument("baseline dimension mismatch");
  }
}

void BaselineRemoval::Evaluate(std::span<const double> x, FeatureSet s,
                               std::span<double> out) const {
  if (static_cast<int>(x.size()) != model_.d) throw InvalidArgument("x dimension mismatch");
  std::vector<double> z(baseline_);
  for (int i : s.indices()) z[i] = x[i];
  model_.fn(z, out);
}

MarginalRemoval::MarginalRemoval(FullModel model, const Sampler& sampler, int m,
                                 std::uint64_t seed)
    : model_(std::move(model)) {
  if (m < 1) throw InvalidArgument("marginal removal needs m >= 1");
  std::mt19937_64 rng(seed);
  background_.resize(m, model_.d);
  for (int j = 0; j < m; ++j) sampler(rng, Row(background_, j));
}

MarginalRemoval::MarginalRemoval(FullModel model, RowMatrix background)
    : model_(std::move(model)), background_(std::move(background)) {
  if (background_.rows() < 1 || background_.cols() != model_.d) {
    throw InvalidArgument("background must be a non-empty n x d matrix");
  }
}

void MarginalRemoval::Evaluate(std::span<const double> x, FeatureSet s,
                               std::span<double> out) const {
  std::vector<double> se(out.size());
  EvaluateWithError(x, s, out, se);
}

void MarginalRemoval::EvaluateWithError(std::span<const double> x, FeatureSet s,
                                        std::span<double> out,
                                        std::span<double> se) const {
  if (static_cast<int>(x.size()) != model_.d) throw InvalidArgument("x dimension mismatch");
  const int c = model_.c;
  std::fill(out.begin(), out.end(), 0.0);
  std::fill(se.begin(), se.end(), 0.0);
  if (s == FeatureSet::Full(model_.d)) {
    model_.fn(x, out);
    return;
  }
  const auto m = background_.rows();
  std::vector<double> z(x.size());
  std::vector<double> v(static_cast<std::size_t>(c));
  std::vector<double> sum2(static_cast<std::size_t>(c), 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto bg = Row(background_, j);
    for (int i = 0; i < model_.d; ++i) z[i] = s.contains(i) ? x[i] : bg[i];
    model_.fn(z, v);
    for (int k = 0; k < c; ++k) {
      out[k] += v[k];
      sum2[k] += v[k] * v[k];
    }
  }
  for (int k = 0; k < c; ++k) {
    out[k] /= static_cast<double>(m);
    if (m > 1) {
      const double var = std::max(0.0, (sum2[k] / m - out[k] * out[k]) * m / (m - 1.0));
      se[k] = std::sqrt(var / m);
    }
  }
}

ExactConditionalRemoval::ExactConditionalRemoval(MultilinearTarget target,
                                                 PairsGaussian world)
    : target_(std::move(target)), world_(world) {
  if (target_.num_features() != world_.num_features()) {
    throw InvalidArgument("target and world dimensions differ");
  }
}

void ExactConditionalRemoval::Evaluate(std::span<const double> x, FeatureSet s,
                                       std::span<double> out) const {
  if (static_cast<int>(x.size()) != target_.num_features()) {
    throw InvalidArgument("x dimension mismatch");
  }
  out[0] = ExactConditionalValue(target_, world_, x, s);
}

MonteCarloConditionalRemoval::MonteCarloConditionalRemoval(FullModel model,
                                                           PairsGaussian world,
                                                           int m,
                                                           std::uint64_t seed)
    : model_(std::move(model)), world_(world), m_(m), seed_(seed) {
  if (m < 1) throw InvalidArgument("conditional sampling needs m >= 1");
  if (model_.d != world_.num_features()) {
    throw InvalidArgument("model and world dimensions differ");
  }
}

void MonteCarloConditionalRemoval::Evaluate(std::span<const double> x, FeatureSet s,
                                            std::span<double> out) const {
  std::vector<double> se(out.size());
  EvaluateWithError(x, s, out, se);
}

void MonteCarloConditionalRemoval::EvaluateWithError(std::span<const double> x,
                                                     FeatureSet s,
                                                     std::span<double> out,
                                                     std::span<double> se) const {
  const int c = model_.c;
  std::fill(out.begin(), out.end(), 0.0);
  std::fill(se.begin(), se.end(), 0.0);
  std::mt19937_64 rng(seed_ ^ (0x9E3779B97F4A7C15ull * (s.bits() + 1ull)));
  std::vector<double> z(x.size());
  std::vector<double> v(static_cast<std::size_t>(c));
  std::vector<double> sum2(static_cast<std::size_t>(c), 0.0);
  for (int j = 0; j < m_; ++j) {
    world_.SampleConditional(x, s, rng, z);
    model_.fn(z, v);
    for (int k = 0; k < c; ++k) {
      out[k] += v[k];
      sum2[k] += v[k] * v[k];
    }
  }
  for (int k = 0; k < c; ++k) {
    out[k] /= m_;
    if (m_ > 1) {
      const double var =
          std::max(0.0, (sum2[k] / m_ - out[k] * out[k]) * m_ / (m_ - 1.0));
      se[k] = std::sqrt(var / m_);
    }
  }
}

void TableGame::Evaluate(std::span<const double>, FeatureSet s,
                         std::span<double> out) const {
  const auto v = table_.at(s);
  std::copy(v.begin(), v.end(), out.begin());
}

void CountingMaskedFunction::Evaluate(std::span<const double> x, FeatureSet s,
                                      std::span<double> out) const {
  ++queries_;
  inner_.Evaluate(x, s, out);
}

void CountingMaskedFunction::EvaluateMasked(const RowMatrix& x,
                                            std::span<const FeatureSet> masks,
                                            RowMatrix& out) const {
  queries_ += static_cast<long>(masks.size());
  inner_.EvaluateMasked(x, masks, out);
}

FeatureEncoder::FeatureEncoder(const std::vector<FeatureInfo>& features,
                               const RowMatrix& x)
    : features_(features) {
  if (static_cast<int>(features.size()) != x.cols()) {
    throw InvalidArgument("feature metadata does not match data width");
  }
  const auto n = x.rows();
  mean_.assign(features.size(), 0.0);
  scale_.assign(features.size(), 1.0);
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].kind != FeatureKind::kContinuous || n == 0) continue;
    const auto col = x.col(static_cast<Eigen::Index>(j));
    const double mu = col.mean();
    const double var = (col.array() - mu).square().mean();
    mean_[j] = mu;
    scale_[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  Layout();
}

FeatureEncoder FeatureEncoder::FromParts(std::vector<FeatureInfo> features,
                                         std::vector<double> means,
                                         std::vector<double> scales) {
  if (means.size() != features.size() || scales.size() != features.size()) {
    throw InvalidArgument("encoder parts have inconsistent sizes");
  }
  FeatureEncoder e;
  e.features_ = std::move(features);
  e.mean_ = std::move(means);
  e.scale_ = std::move(scales);
  e.Layout();
  return e;
}

void FeatureEncoder::Layout() {
  offset_.clear();
  width_ = 0;
  for (const auto& f : features_) {
    offset_.push_back(width_);
    width_ += f.kind == FeatureKind::kCategorical ? f.num_levels() + 1 : 1;
  }
}

void FeatureEncoder::Encode(std::span<const double> x, FeatureSet s,
                            std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const int d = num_features();
  for (int j = 0; j < d; ++j) {
    const bool on = s.contains(j);
    const auto& f = features_[j];
    if (f.kind == FeatureKind::kCategorical) {
      int level = f.num_levels();  // the masked slot
      if (on) {
        level = static_cast<int>(std::lround(x[j]));
        if (level < 0 || level >= f.num_levels()) level = f.num_levels();
      }
      out[offset_[j] + level] = 1.0;
    } else if (on) {
      out[offset_[j]] = (x[j] - mean_[j]) / scale_[j];
    }
    out[width_ + j] = on ? 1.0 : 0.0;
  }
}

Eigen::MatrixXd SurrogateModel::EncodeBatch(const RowMatrix& x,
                                            std::span<const FeatureSet> masks) const {
  const int w = encoder_.encoded_dim();
  RowMatrix enc(x.rows(), w);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    encoder_.Encode(Row(x, i), masks[static_cast<std::size_t>(i)], Row(enc, i));
  }
  return enc;
}

void SurrogateModel::Postprocess(Eigen::MatrixXd& raw) const {
  if (task_ == Task::kRegression) {
    raw = (raw.array() * y_scale_ + y_mean_).matrix();
    return;
  }
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double mx = raw.row(i).maxCoeff();
    const double lse = mx + std::log((raw.row(i).array() - mx).exp().sum());
    raw.row(i).array() -= lse;
  }
}

void SurrogateModel::Evaluate(std::span<const double> x, FeatureSet s,
                              std::span<double> out) const {
  RowMatrix xs(1, static_cast<Eigen::Index>(x.size()));
  std::copy(x.begin(), x.end(), xs.data());
  RowMatrix y;
  const FeatureSet masks[1] = {s};
  EvaluateMasked(xs, masks, y);
  std::copy(y.data(), y.data() + y.size(), out.begin());
}

void SurrogateModel::EvaluateMasked(const RowMatrix& x,
                                    std::span<const FeatureSet> masks,
                                    RowMatrix& out) const {
  if (!trained_) throw InvalidArgument("surrogate has not been trained");
  if (x.cols() != num_features()) throw InvalidArgument("x dimension mismatch");
  if (static_cast<std::size_t>(x.rows()) != masks.size()) {
    throw InvalidArgument("one mask per row required");
  }
  Eigen::MatrixXd raw = net_.Predict(EncodeBatch(x, masks));
  Postprocess(raw);
  out = raw;
}

RowMatrix SurrogateModel::PredictFull(const RowMatrix& x) const {
  std::vector<FeatureSet> masks(static_cast<std::size_t>(x.rows()),
                                FeatureSet::Full(num_features()));
  RowMatrix out;
  EvaluateMasked(x, masks, out);
  if (task_ == Task::kClassification) out = out.array().exp().matrix();
  return out;
}

FullModel SurrogateModel::AsFullModel() const {
  return {num_features(), output_dim(),
          [this](std::span<const double> x, std::span<double> out) {
            Evaluate(x, FeatureSet::Full(num_features()), out);
          }};
}

std::vector<double> SurrogateModel::best_validation_loss() const {
  std::vector<double> out;
  double best = std::numeric_limits<double>::infinity();
  for (double v : val_loss_) {
    best = std::min(best, v);
    out.push_back(best);
  }
  return out;
}

SurrogateModel SurrogateModel::Restore(FeatureEncoder encoder, Mlp net, Task task,
                                       int output_dim, double y_mean,
                                       double y_scale) {
  if (net.spec().input_dim != encoder.encoded_dim() ||
      net.spec().output_dim != output_dim) {
    throw InvalidArgument("surrogate network does not match its encoder");
  }
  SurrogateModel m;
  m.encoder_ = std::move(encoder);
  m.net_ = std::move(net);
  m.task_ = task;
  m.output_dim_ = output_dim;
  m.y_mean_ = y_mean;
  m.y_scale_ = y_scale;
  m.trained_ = true;
  return m;
}

namespace {

// Loss on standardized targets (regression) or class indices (classification);
// writes dLoss/dRaw into grad when non-null.
double BatchLoss(Task task, const Eigen::MatrixXd& raw, const Eigen::MatrixXd& target,
                 Eigen::MatrixXd* grad) {
  const double b = static_cast<double>(raw.rows());
  if (task == Task::kRegression) {
    const Eigen::MatrixXd diff = raw - target;
    if (grad) *grad = diff * (2.0 / b);
    return diff.squaredNorm() / b;
  }
  double loss = 0.0;
  if (grad) grad->resize(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double mx = raw.row(i).maxCoeff();
    Eigen::RowVectorXd p = (raw.row(i).array() - mx).exp();
    const double z = p.sum();
    p /= z;
    const auto label = static_cast<Eigen::Index>(target(i, 0));
    loss -= raw(i, label) - mx - std::log(z);
    if (grad) {
      grad->row(i) = p / b;
      (*grad)(i, label) -= 1.0 / b;
    }
  }
  return loss / b;
}

}  // namespace

SurrogateModel TrainSurrogate(const Dataset& data, const WeightTable& mask_dist,
                              const SurrogateConfig& config) {
  const int n = data.num_rows();
  const int d = data.num_features();
  if (n < 1 || d < 1) throw InvalidArgument("surrogate training needs data");
  if (mask_dist.d != d) throw InvalidArgument("mask distribution dimension mismatch");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate > 0.0)) {
    throw InvalidArgument("invalid surrogate training configuration");
  }
  if (data.task == Task::kClassification && data.class_names.size() < 2) {
    throw InvalidArgument("classification needs at least two classes");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  int n_val = static_cast<int>(std::lround(config.validation_fraction * n));
  n_val = std::clamp(n_val, n >= 2 ? 1 : 0, std::max(0, n - 1));
  std::vector<int> val_rows(order.begin(), order.begin() + n_val);
  std::vector<int> fit_rows(order.begin() + n_val, order.end());
  if (val_rows.empty()) val_rows = fit_rows;

  SurrogateModel model;
  model.task_ = data.task;
  model.output_dim_ = data.output_dim();
  model.encoder_ = FeatureEncoder(data.features, data.Subset(fit_rows).x);

  // Standardized regression targets; class indices pass through.
  RowMatrix y = data.y;
  if (data.task == Task::kRegression) {
    double mu = 0.0;
    for (int r : fit_rows) mu += data.y(r, 0);
    mu /= fit_rows.size();
    double var = 0.0;
    for (int r : fit_rows) var += (data.y(r, 0) - mu) * (data.y(r, 0) - mu);
    var /= fit_rows.size();
    model.y_mean_ = mu;
    model.y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
    y = ((data.y.array() - mu) / model.y_scale_).matrix();
  }

  MlpSpec spec{model.encoder_.encoded_dim(), config.hidden, model.output_dim_};
  model.net_ = Mlp(spec, config.seed + 1);
  Adam adam(model.net_.num_params(), config.learning_rate);

  // Fixed validation masks so epoch losses are comparable.
  std::mt19937_64 val_rng(config.seed + 2);
  std::vector<FeatureSet> val_masks(val_rows.size());
  for (auto& m : val_masks) m = SampleSubset(mask_dist, val_rng);
  RowMatrix val_x(static_cast<Eigen::Index>(val_rows.size()), d);
  Eigen::MatrixXd val_y(static_cast<Eigen::Index>(val_rows.size()), y.cols());
  for (std::size_t i = 0; i < val_rows.size(); ++i) {
    val_x.row(static_cast<Eigen::Index>(i)) = data.x.row(val_rows[i]);
    val_y.row(static_cast<Eigen::Index>(i)) = y.row(val_rows[i]);
  }
  const Eigen::MatrixXd val_enc = model.EncodeBatch(val_x, val_masks);

  std::vector<double> best_params(model.net_.params().begin(), model.net_.params().end());
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const int bs = config.batch_size;
  std::vector<FeatureSet> masks;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(fit_rows.begin(), fit_rows.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < fit_rows.size(); start += bs) {
      const std::size_t end = std::min(fit_rows.size(), start + bs);
      const auto b = static_cast<Eigen::Index>(end - start);
      RowMatrix bx(b, d);
      Eigen::MatrixXd by(b, y.cols());
      masks.resize(static_cast<std::size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        const int r = fit_rows[start + static_cast<std::size_t>(i)];
        bx.row(i) = data.x.row(r);
        by.row(i) = y.row(r);
        masks[static_cast<std::size_t>(i)] = SampleSubset(mask_dist, rng);
      }
      model.net_.ZeroGrad();
      const Eigen::MatrixXd& raw = model.net_.Forward(model.EncodeBatch(bx, masks));
      Eigen::MatrixXd grad;
      const double loss = BatchLoss(data.task, raw, by, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("surrogate training diverged at epoch " +
                             std::to_string(epoch) + " (non-finite loss)");
      }
      epoch_loss += loss * static_cast<double>(b);
      model.net_.Backward(grad);
      adam.Step(model.net_.params(), model.net_.grads());
    }
    model.train_loss_.push_back(epoch_loss / static_cast<double>(fit_rows.size()));
    const double vl = BatchLoss(data.task, model.net_.Predict(val_enc), val_y, nullptr);
    if (!std::isfinite(vl)) {
      throw NumericalError("surrogate validation loss is non-finite at epoch " +
                           std::to_string(epoch));
    }
    model.val_loss_.push_back(vl);
    if (vl < best) {
      best = vl;
      model.best_epoch_ = epoch;
      best_params.assign(model.net_.params().begin(), model.net_.params().end());
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.net_.SetParams(best_params);
  model.trained_ = true;
  return model;
}

}  // namespace instashap
