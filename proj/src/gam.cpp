#include "instashap/gam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "instashap/optim.hpp"
#include "instashap/parallel.hpp"
#include "instashap/rational.hpp"

namespace instashap {

std::string ToString(TrainingObjective objective) {
  switch (objective) {
    case TrainingObjective::kVanilla: return "vanilla";
    case TrainingObjective::kInstaShap: return "instashap";
    case TrainingObjective::kFastShap: return "fastshap";
    case TrainingObjective::kFastFaith: return "fastfaith";
  }
  return "unknown";
}

TrainingObjective ParseTrainingObjective(const std::string& name) {
  if (name == "vanilla") return TrainingObjective::kVanilla;
  if (name == "instashap") return TrainingObjective::kInstaShap;
  if (name == "fastshap") return TrainingObjective::kFastShap;
  if (name == "fastfaith") return TrainingObjective::kFastFaith;
  throw InvalidArgument("unknown training objective '" + name + "'");
}

std::string ToString(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kConjugateGradient: return "cg";
  }
  return "unknown";
}

OptimizerKind ParseOptimizerKind(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "cg") return OptimizerKind::kConjugateGradient;
  throw InvalidArgument("unknown optimizer '" + name + "'");
}

namespace {

double SortedQuantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - t) + sorted[hi] * t;
}

}  // namespace

std::vector<double> MakeKnots(std::span<const double> values, int max_knots) {
  if (max_knots < 2) throw InvalidArgument("need at least two knots");
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) sorted.push_back(v);
  }
  if (sorted.empty()) return {0.0};
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) <= max_knots) return uniq;

  // Interior knots at quantiles of an even mix of the empirical distribution
  // and a uniform over the central 99.8%; this keeps some resolution in the
  // tails without bunching knots where the data are dense.
  const double lo = SortedQuantile(sorted, 0.001), hi = SortedQuantile(sorted, 0.999);
  const auto n = static_cast<double>(sorted.size());
  auto mix_cdf = [&](double v) {
    const double data =
        static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin()) / n;
    const double uniform = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : (v < lo ? 0.0 : 1.0);
    return 0.5 * data + 0.5 * uniform;
  };
  std::vector<double> knots = {sorted.front(), sorted.back()};
  for (int j = 1; j + 1 < max_knots; ++j) {
    const double level = static_cast<double>(j) / (max_knots - 1);
    double a = sorted.front(), b = sorted.back();
    for (int it = 0; it < 100 && b - a > 1e-12 * (1.0 + std::abs(a)); ++it) {
      const double m = 0.5 * (a + b);
      (mix_cdf(m) < level ? a : b) = m;
    }
    knots.push_back(0.5 * (a + b));
  }
  std::sort(knots.begin(), knots.end());
  const double tol = 1e-9 * (sorted.back() - sorted.front());
  std::vector<double> out;
  for (double k : knots) {
    if (out.empty() || k - out.back() > tol) out.push_back(k);
  }
  return out;
}

int AxisBasis::Weights(double v, int idx[2], double w[2]) const {
  if (kind == FeatureKind::kCategorical) {
    idx[0] = std::clamp(static_cast<int>(std::lround(std::isfinite(v) ? v : 0.0)), 0,
                        std::max(0, levels - 1));
    w[0] = 1.0;
    return 1;
  }
  const int k = static_cast<int>(knots.size());
  if (std::isnan(v)) {
    idx[0] = 0;
    w[0] = 0.0;
    return 1;
  }
  if (k == 1 || v <= knots.front()) {
    idx[0] = 0;
    w[0] = 1.0;
    return 1;
  }
  if (v >= knots.back()) {
    idx[0] = k - 1;
    w[0] = 1.0;
    return 1;
  }
  const int j = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), v) - knots.begin()) - 1;
  const double t = (v - knots[j]) / (knots[j + 1] - knots[j]);
  idx[0] = j;
  idx[1] = j + 1;
  w[0] = 1.0 - t;
  w[1] = t;
  return 2;
}

ShapeFunction::ShapeFunction(FeatureSet subset, std::vector<AxisBasis> axes, int output_dim)
    : subset_(subset), axes_(std::move(axes)), c_(output_dim) {
  if (subset.empty()) throw InvalidArgument("shape functions need a non-empty subset");
  if (subset.size() > kMaxShapeOrder) {
    throw InvalidArgument("shape " + subset.ToString() + " exceeds the maximum order " +
                          std::to_string(kMaxShapeOrder));
  }
  if (output_dim < 1) throw InvalidArgument("output dimension must be positive");
  std::sort(axes_.begin(), axes_.end(),
            [](const AxisBasis& a, const AxisBasis& b) { return a.feature < b.feature; });
  std::uint32_t bits = 0;
  for (const auto& a : axes_) {
    if (a.size() < 1) throw InvalidArgument("empty axis basis");
    if (a.kind == FeatureKind::kContinuous &&
        !std::is_sorted(a.knots.begin(), a.knots.end())) {
      throw InvalidArgument("knots must be sorted");
    }
    bits |= 1u << a.feature;
  }
  if (bits != subset.bits() || static_cast<int>(axes_.size()) != subset.size()) {
    throw InvalidArgument("axes do not match subset " + subset.ToString());
  }
  stride_.assign(axes_.size(), 1);
  cells_ = 1;
  for (int a = static_cast<int>(axes_.size()) - 1; a >= 0; --a) {
    stride_[a] = cells_;
    cells_ *= static_cast<std::size_t>(axes_[a].size());
  }
  coef_.assign(cells_ * static_cast<std::size_t>(c_), 0.0);
}

void ShapeFunction::AddTo(std::span<const double> x, std::span<double> out) const {
  ForEachCell(x, [&](std::size_t cell, double w) {
    const double* p = coef_.data() + cell * c_;
    for (int o = 0; o < c_; ++o) out[o] += w * p[o];
  });
}

std::vector<double> ShapeFunction::operator()(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(c_), 0.0);
  AddTo(x, out);
  return out;
}

AdditiveModel::AdditiveModel(int d, std::vector<double> intercept,
                             std::vector<ShapeFunction> shapes, TrainingObjective objective)
    : d_(d), intercept_(std::move(intercept)), shapes_(std::move(shapes)), objective_(objective) {
  if (d < 1) throw InvalidArgument("model needs at least one feature");
  if (intercept_.empty()) throw InvalidArgument("model needs at least one output");
  std::set<std::uint32_t> seen;
  for (const auto& s : shapes_) {
    if (!s.subset().fits(d)) throw InvalidArgument("shape subset outside [d]");
    if (s.output_dim() != output_dim()) throw InvalidArgument("shape output mismatch");
    if (!seen.insert(s.subset().bits()).second) {
      throw InvalidArgument("duplicate shape " + s.subset().ToString());
    }
  }
}

std::vector<FeatureSet> AdditiveModel::frontier() const {
  std::vector<FeatureSet> out = {FeatureSet::Empty()};
  for (const auto& s : shapes_) out.push_back(s.subset());
  return out;
}

const ShapeFunction* AdditiveModel::Find(FeatureSet t) const {
  for (const auto& s : shapes_) {
    if (s.subset() == t) return &s;
  }
  return nullptr;
}

std::size_t AdditiveModel::num_params() const {
  std::size_t n = intercept_.size();
  for (const auto& s : shapes_) n += s.coefficients().size();
  return n;
}

void AdditiveModel::PredictMasked(std::span<const double> x, FeatureSet s,
                                  std::span<double> out) const {
  if (static_cast<int>(x.size()) != d_) throw InvalidArgument("x dimension mismatch");
  if (static_cast<int>(out.size()) != output_dim()) throw InvalidArgument("output size mismatch");
  std::copy(intercept_.begin(), intercept_.end(), out.begin());
  for (const auto& shape : shapes_) {
    if (shape.subset().is_subset_of(s)) shape.AddTo(x, out);
  }
}

void AdditiveModel::Predict(std::span<const double> x, std::span<double> out) const {
  PredictMasked(x, FeatureSet::Full(d_), out);
}

std::vector<double> AdditiveModel::Predict(std::span<const double> x) const {
  std::vector<double> out(intercept_.size());
  Predict(x, out);
  return out;
}

RowMatrix AdditiveModel::PredictBatch(const RowMatrix& x) const {
  if (x.cols() != d_) throw InvalidArgument("x dimension mismatch");
  RowMatrix out(x.rows(), output_dim());
  ParallelFor(static_cast<std::size_t>(x.rows()), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      Predict(Row(x, row), Row(out, row));
    }
  });
  return out;
}

std::vector<FeatureSet> NormalizeFrontier(const std::vector<FeatureSet>& frontier, int d) {
  if (frontier.empty()) throw InvalidArgument("frontier is empty");
  std::set<std::pair<int, std::uint32_t>> sorted = {{0, 0u}};
  for (FeatureSet t : frontier) {
    if (!t.fits(d)) throw InvalidArgument("frontier set " + t.ToString() + " outside [d]");
    if (t.size() > kMaxShapeOrder) {
      throw InvalidArgument("frontier set " + t.ToString() + " exceeds the maximum order " +
                            std::to_string(kMaxShapeOrder));
    }
    sorted.insert({t.size(), t.bits()});
  }
  std::vector<FeatureSet> out;
  for (const auto& [size, bits] : sorted) out.emplace_back(bits);
  return out;
}

AdditiveModel BuildAdditiveModel(const std::vector<FeatureSet>& frontier, const RowMatrix& x,
                                 const std::vector<FeatureInfo>& features, int output_dim,
                                 const BasisOptions& basis) {
  const int d = static_cast<int>(x.cols());
  if (static_cast<int>(features.size()) != d) {
    throw InvalidArgument("feature metadata does not match data width");
  }
  if (x.rows() < 1) throw InvalidArgument("basis construction needs data");
  const auto sets = NormalizeFrontier(frontier, d);
  std::map<std::pair<int, int>, std::vector<double>> knot_cache;
  std::vector<ShapeFunction> shapes;
  for (FeatureSet t : sets) {
    if (t.empty()) continue;
    const int order = t.size();
    if (order > static_cast<int>(basis.knots_by_order.size())) {
      throw InvalidArgument("no knot count configured for order " + std::to_string(order));
    }
    const int k = basis.knots_by_order[order - 1];
    std::vector<AxisBasis> axes;
    for (int j : t.indices()) {
      AxisBasis a;
      a.feature = j;
      a.kind = features[j].kind;
      if (a.kind == FeatureKind::kCategorical) {
        a.levels = std::max(1, features[j].num_levels());
      } else {
        auto key = std::make_pair(j, k);
        auto it = knot_cache.find(key);
        if (it == knot_cache.end()) {
          std::vector<double> col(static_cast<std::size_t>(x.rows()));
          for (Eigen::Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
          it = knot_cache.emplace(key, MakeKnots(col, k)).first;
        }
        a.knots = it->second;
      }
      axes.push_back(std::move(a));
    }
    shapes.emplace_back(t, std::move(axes), output_dim);
  }
  AdditiveModel model(d, std::vector<double>(static_cast<std::size_t>(output_dim), 0.0),
                      std::move(shapes), TrainingObjective::kVanilla);
  model.features = features;
  return model;
}

namespace {

void CollectCombinations(int nb, int choose, int start, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == choose) {
    out.push_back(cur);
    return;
  }
  for (int b = start; b < nb; ++b) {
    cur.push_back(b);
    CollectCombinations(nb, choose, b + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<FeatureSet> PairBlockFrontier(int d, int blocks, int max_order) {
  if (d < 1 || blocks < 0 || max_order < 0) throw InvalidArgument("invalid block frontier");
  const int nb = (d + 1) / 2;
  std::vector<FeatureSet> sets = {FeatureSet::Empty()};
  std::set<std::uint32_t> seen = {0u};
  for (int choose = 1; choose <= std::min(blocks, nb); ++choose) {
    std::vector<std::vector<int>> combos;
    std::vector<int> cur;
    CollectCombinations(nb, choose, 0, cur, combos);
    for (const auto& combo : combos) {
      std::uint32_t u = 0;
      for (int b : combo) {
        u |= 1u << (2 * b);
        if (2 * b + 1 < d) u |= 1u << (2 * b + 1);
      }
      ForEachSubset(FeatureSet(u), [&](FeatureSet s) {
        if (s.size() <= max_order && seen.insert(s.bits()).second) sets.push_back(s);
      });
    }
  }
  return NormalizeFrontier(sets, d);
}

std::vector<FeatureSet> OrderFrontier(int d, int k) {
  CheckExhaustive(d);
  if (k < 0) throw InvalidArgument("order must be non-negative");
  std::vector<FeatureSet> sets;
  for (int s = 0; s <= std::min(k, d); ++s) {
    std::vector<std::vector<int>> combos;
    std::vector<int> cur;
    CollectCombinations(d, s, 0, cur, combos);
    for (const auto& c : combos) sets.push_back(FeatureSet::FromIndices(c));
  }
  return NormalizeFrontier(sets, d);
}

void TrainConfig::Validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw InvalidArgument("learning-rate decay must be positive");
  if (!(anchor_probability >= 0.0 && anchor_probability <= 0.5)) {
    throw InvalidArgument("anchor probability must lie in [0, 0.5]");
  }
  if (masks_per_point < 1) throw InvalidArgument("masks per point must be positive");
  if (patience < 0) throw InvalidArgument("patience must be non-negative");
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge penalty must be non-negative");
  if (!(smoothness >= 0.0)) throw InvalidArgument("smoothness penalty must be non-negative");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw InvalidArgument("validation fraction must lie in [0, 1)");
  }
}

MaskSampler::MaskSampler(int d, MaskSampling kind, double anchor_probability)
    : d_(d), kind_(kind), anchor_(anchor_probability) {
  CheckExhaustive(d);
  WeightTable w;
  if (kind == MaskSampling::kShapUniform || (kind == MaskSampling::kKernelAnchored && d < 2)) {
    w = ShapUniformWeights(d);
  } else if (kind == MaskSampling::kKernelAnchored) {
    w = ShapKernelWeights(d);
  } else {
    return;
  }
  double acc = 0.0;
  for (int s = 0; s <= d; ++s) {
    acc += w.size_mass(s);
    size_mass_.push_back(acc);
  }
  for (double& m : size_mass_) m /= acc;
}

FeatureSet MaskSampler::operator()(std::mt19937_64& rng) const {
  if (kind_ == MaskSampling::kFullOnly) return FeatureSet::Full(d_);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (kind_ == MaskSampling::kKernelAnchored) {
    const double a = u(rng);
    if (a < anchor_) return FeatureSet::Full(d_);
    if (a < 2.0 * anchor_) return FeatureSet::Empty();
  }
  const double r = u(rng);
  const int size = static_cast<int>(
      std::lower_bound(size_mass_.begin(), size_mass_.end(), r) - size_mass_.begin());
  return SampleSubsetOfSize(d_, std::min(size, d_), rng);
}

namespace {

constexpr int kShards = 4;

enum class LossKind { kSquared, kCrossEntropy };

// Training state shared by the masked and labelled objectives. Coefficients
// live in one flat vector in scaled units: prediction = μ + σ Σ φ.
class GamFitter {
 public:
  GamFitter(AdditiveModel model, LossKind loss, std::vector<double> mu, double sigma,
            const TrainConfig& config)
      : model_(std::move(model)), loss_(loss), mu_(std::move(mu)), sigma_(sigma),
        config_(config) {
    std::size_t off = 0;
    for (const auto& s : model_.shapes()) {
      offsets_.push_back(off);
      off += s.coefficients().size();
      // λ times the mean squared coefficient of each shape.
      ridge_.insert(ridge_.end(), s.coefficients().size(),
                    config.ridge / static_cast<double>(s.num_cells()));
    }
    theta_.assign(off, 0.0);
    grad_.assign(off, 0.0);
    shard_grad_.assign(kShards, std::vector<double>(off, 0.0));
    c_ = model_.output_dim();
    if (config.smoothness > 0.0) BuildCurvatureTerms();
    if (config.optimizer == OptimizerKind::kAdam) adam_ = Adam(off, config.learning_rate);
    lr_ = config.learning_rate;
  }

  int output_dim() const { return c_; }

  // Scaled-unit prediction without the intercept for squared loss, logits
  // (with intercept) for cross-entropy.
  void Raw(std::span<const double> x, FeatureSet s, double* out) const {
    for (int o = 0; o < c_; ++o) out[o] = loss_ == LossKind::kCrossEntropy ? mu_[o] : 0.0;
    AddDesign(x, s, theta_.data(), out);
  }

  // out[o] += Σ_j φ_j(x) · v for shapes inside s.
  void AddDesign(std::span<const double> x, FeatureSet s, const double* v, double* out) const {
    const auto& shapes = model_.shapes();
    for (std::size_t j = 0; j < shapes.size(); ++j) {
      if (!shapes[j].subset().is_subset_of(s)) continue;
      const double* p = v + offsets_[j];
      shapes[j].ForEachCell(x, [&](std::size_t cell, double w) {
        for (int o = 0; o < c_; ++o) out[o] += w * p[cell * c_ + o];
      });
    }
  }

  // g += scale * (design row)ᵀ r, with r per output; squared weights when
  // `squared` (diagonal of the normal matrix).
  void ScatterDesign(std::span<const double> x, FeatureSet s, const double* r, double scale,
                     bool squared, double* g) const {
    const auto& shapes = model_.shapes();
    for (std::size_t j = 0; j < shapes.size(); ++j) {
      if (!shapes[j].subset().is_subset_of(s)) continue;
      double* gp = g + offsets_[j];
      shapes[j].ForEachCell(x, [&](std::size_t cell, double w) {
        const double ww = squared ? w * w : w;
        for (int o = 0; o < c_; ++o) gp[cell * c_ + o] += scale * ww * r[o];
      });
    }
  }

  // Sharded, deterministic sum over rows of fn(row, shard buffer) into out.
  template <class Fn>
  void ReduceRows(Eigen::Index n, std::vector<double>& out, Fn&& fn) const {
    const auto rows = static_cast<std::size_t>(n);
    ParallelFor(kShards, [&](std::size_t s0, std::size_t s1) {
      for (std::size_t sh = s0; sh < s1; ++sh) {
        auto& g = shard_grad_[sh];
        std::fill(g.begin(), g.end(), 0.0);
        const std::size_t lo = rows * sh / kShards, hi = rows * (sh + 1) / kShards;
        for (std::size_t i = lo; i < hi; ++i) fn(static_cast<Eigen::Index>(i), g.data());
      }
    });
    out.assign(theta_.size(), 0.0);
    for (int sh = 0; sh < kShards; ++sh) {
      for (std::size_t p = 0; p < out.size(); ++p) out[p] += shard_grad_[sh][p];
    }
  }

  // H v with H = (1/(n c)) Σ_i Φ_iᵀ Φ_i + diag(ridge), the Hessian/2 of the scaled
  // squared loss.
  void NormalApply(const RowMatrix& x, std::span<const FeatureSet> masks,
                   const std::vector<double>& v, std::vector<double>& out) const {
    const double scale = 1.0 / (static_cast<double>(x.rows()) * c_);
    ReduceRows(x.rows(), out, [&](Eigen::Index i, double* g) {
      double pred[64] = {};
      AddDesign(Row(x, i), masks[static_cast<std::size_t>(i)], v.data(), pred);
      ScatterDesign(Row(x, i), masks[static_cast<std::size_t>(i)], pred, scale, false, g);
    });
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += ridge_[p] * v[p];
    AddCurvature(v, 1.0, out);
  }

  void NormalRhs(const RowMatrix& x, std::span<const FeatureSet> masks, const RowMatrix& targets,
                 std::vector<double>& out) const {
    const double scale = 1.0 / (static_cast<double>(x.rows()) * c_);
    ReduceRows(x.rows(), out, [&](Eigen::Index i, double* g) {
      ScatterDesign(Row(x, i), masks[static_cast<std::size_t>(i)],
                    targets.data() + i * targets.cols(), scale, false, g);
    });
  }

  void NormalDiagonal(const RowMatrix& x, std::span<const FeatureSet> masks,
                      std::vector<double>& out) const {
    const double scale = 1.0 / (static_cast<double>(x.rows()) * c_);
    const std::vector<double> ones(static_cast<std::size_t>(c_), 1.0);
    ReduceRows(x.rows(), out, [&](Eigen::Index i, double* g) {
      ScatterDesign(Row(x, i), masks[static_cast<std::size_t>(i)], ones.data(), scale, true, g);
    });
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += ridge_[p];
    for (const auto& t : curvature_) {
      for (int k = 0; k < 3; ++k) out[t.i[k]] += t.w * t.a[k] * t.a[k];
    }
  }

  bool squared_loss() const { return loss_ == LossKind::kSquared; }

  // Ridge plus curvature penalty at theta.
  double Penalty() const {
    double r = 0.0;
    for (std::size_t p = 0; p < theta_.size(); ++p) r += ridge_[p] * theta_[p] * theta_[p];
    for (const auto& t : curvature_) {
      const double dv = t.a[0] * theta_[t.i[0]] + t.a[1] * theta_[t.i[1]] + t.a[2] * theta_[t.i[2]];
      r += t.w * dv * dv;
    }
    return r;
  }

  // out += scale * Σ w (a·v) a over curvature terms.
  void AddCurvature(const std::vector<double>& v, double scale, std::vector<double>& out) const {
    for (const auto& t : curvature_) {
      const double dv = t.a[0] * v[t.i[0]] + t.a[1] * v[t.i[1]] + t.a[2] * v[t.i[2]];
      for (int k = 0; k < 3; ++k) out[t.i[k]] += scale * t.w * dv * t.a[k];
    }
  }

  // Loss of one sample; adds d(loss)/d(theta) * scale into g when non-null.
  double SampleLoss(std::span<const double> x, FeatureSet s, const double* target, double scale,
                    double* g) const {
    double raw[64];
    std::vector<double> big;
    double* pred = raw;
    if (c_ > 64) {
      big.resize(static_cast<std::size_t>(c_));
      pred = big.data();
    }
    Raw(x, s, pred);
    double gbuf[64];
    std::vector<double> gbig;
    double* gout = gbuf;
    if (c_ > 64) {
      gbig.resize(static_cast<std::size_t>(c_));
      gout = gbig.data();
    }
    double loss = 0.0;
    if (loss_ == LossKind::kSquared) {
      for (int o = 0; o < c_; ++o) {
        const double r = pred[o] - target[o];
        loss += r * r / c_;
        gout[o] = 2.0 * r / c_;
      }
    } else {
      const int label = static_cast<int>(target[0]);
      const double mx = *std::max_element(pred, pred + c_);
      double z = 0.0;
      for (int o = 0; o < c_; ++o) z += std::exp(pred[o] - mx);
      loss = -(pred[label] - mx - std::log(z));
      for (int o = 0; o < c_; ++o) gout[o] = std::exp(pred[o] - mx) / z - (o == label ? 1.0 : 0.0);
    }
    if (g != nullptr) {
      const auto& shapes = model_.shapes();
      for (std::size_t j = 0; j < shapes.size(); ++j) {
        if (!shapes[j].subset().is_subset_of(s)) continue;
        double* gp = g + offsets_[j];
        shapes[j].ForEachCell(x, [&](std::size_t cell, double w) {
          for (int o = 0; o < c_; ++o) gp[cell * c_ + o] += scale * w * gout[o];
        });
      }
    }
    return loss;
  }

  // One optimizer step on a batch; returns the mean batch loss.
  double Step(const RowMatrix& bx, std::span<const FeatureSet> masks, const RowMatrix& targets) {
    const auto b = static_cast<std::size_t>(bx.rows());
    const double scale = 1.0 / static_cast<double>(b);
    std::vector<double> shard_loss(kShards, 0.0);
    ParallelFor(kShards, [&](std::size_t s0, std::size_t s1) {
      for (std::size_t sh = s0; sh < s1; ++sh) {
        auto& g = shard_grad_[sh];
        std::fill(g.begin(), g.end(), 0.0);
        const std::size_t lo = b * sh / kShards, hi = b * (sh + 1) / kShards;
        for (std::size_t i = lo; i < hi; ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          shard_loss[sh] += SampleLoss(Row(bx, r), masks[i], targets.data() + r * targets.cols(),
                                       scale, g.data());
        }
      }
    });
    double loss = 0.0;
    for (int sh = 0; sh < kShards; ++sh) loss += shard_loss[sh];
    loss *= scale;
    if (!std::isfinite(loss)) throw NumericalError("GAM training diverged (non-finite loss)");
    for (std::size_t p = 0; p < grad_.size(); ++p) {
      double g = 2.0 * ridge_[p] * theta_[p];
      for (int sh = 0; sh < kShards; ++sh) g += shard_grad_[sh][p];
      grad_[p] = g;
    }
    AddCurvature(theta_, 2.0, grad_);
    if (config_.optimizer == OptimizerKind::kAdam) {
      adam_.Step(theta_, grad_);
    } else {
      for (std::size_t p = 0; p < theta_.size(); ++p) theta_[p] -= lr_ * grad_[p];
    }
    return loss;
  }

  double MeanLoss(const RowMatrix& x, std::span<const FeatureSet> masks,
                  const RowMatrix& targets) const {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<double> part(n, 0.0);
    ParallelFor(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        part[i] = SampleLoss(Row(x, r), masks[i], targets.data() + r * targets.cols(), 0.0, nullptr);
      }
    });
    double loss = 0.0;
    for (double v : part) loss += v;
    return loss / static_cast<double>(std::max<std::size_t>(1, n));
  }

  void DecayLearningRate() {
    lr_ *= config_.lr_decay;
    adam_.set_learning_rate(lr_);
  }

  // Loss in label units.
  double Unscale(double loss) const {
    return loss_ == LossKind::kSquared ? loss * sigma_ * sigma_ : loss;
  }

  std::vector<double>& theta() { return theta_; }

  AdditiveModel Snapshot() const {
    AdditiveModel m = model_;
    m.intercept() = mu_;
    const double s = loss_ == LossKind::kSquared ? sigma_ : 1.0;
    for (std::size_t j = 0; j < m.shapes().size(); ++j) {
      auto& coef = m.shapes()[j].coefficients();
      for (std::size_t p = 0; p < coef.size(); ++p) coef[p] = s * theta_[offsets_[j] + p];
    }
    return m;
  }

 private:
  // w (a · θ[i])²: a slope change along one continuous axis of one shape, in
  // units of that axis's mean knot spacing.
  struct CurvatureTerm {
    std::size_t i[3];
    double a[3];
    double w;
  };

  void BuildCurvatureTerms() {
    const auto& shapes = model_.shapes();
    for (std::size_t j = 0; j < shapes.size(); ++j) {
      const auto& sh = shapes[j];
      const auto& axes = sh.axes();
      const double w = config_.smoothness / static_cast<double>(sh.num_cells());
      // Row-major strides, last axis fastest.
      std::vector<std::size_t> stride(axes.size(), 1);
      for (int a = static_cast<int>(axes.size()) - 2; a >= 0; --a) {
        stride[a] = stride[a + 1] * static_cast<std::size_t>(axes[a + 1].size());
      }
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& t = axes[a].knots;
        if (axes[a].kind != FeatureKind::kContinuous || t.size() < 3) continue;
        const double hbar = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
        for (std::size_t cell = 0; cell < sh.num_cells(); ++cell) {
          const std::size_t k = (cell / stride[a]) % t.size();
          if (k == 0 || k + 1 == t.size()) continue;
          const double h0 = t[k] - t[k - 1], h1 = t[k + 1] - t[k];
          for (int o = 0; o < c_; ++o) {
            CurvatureTerm term;
            const std::size_t base = offsets_[j] + static_cast<std::size_t>(o);
            term.i[0] = base + (cell - stride[a]) * c_;
            term.i[1] = base + cell * c_;
            term.i[2] = base + (cell + stride[a]) * c_;
            term.a[0] = hbar / h0;
            term.a[1] = -hbar / h0 - hbar / h1;
            term.a[2] = hbar / h1;
            term.w = w;
            curvature_.push_back(term);
          }
        }
      }
    }
  }

  AdditiveModel model_;
  LossKind loss_;
  std::vector<double> mu_;
  double sigma_;
  TrainConfig config_;
  int c_ = 1;
  std::vector<std::size_t> offsets_;
  std::vector<double> theta_;
  std::vector<double> ridge_;
  std::vector<CurvatureTerm> curvature_;
  std::vector<double> grad_;
  mutable std::vector<std::vector<double>> shard_grad_;
  Adam adam_;
  double lr_;
};

struct RowSplit {
  std::vector<int> fit;
  std::vector<int> val;
};

RowSplit SplitRows(int n, double fraction, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  int n_val = static_cast<int>(std::lround(fraction * n));
  if (n < 2) n_val = 0;
  n_val = std::clamp(n_val, 0, std::max(0, n - 1));
  RowSplit s;
  s.val.assign(order.begin(), order.begin() + n_val);
  s.fit.assign(order.begin() + n_val, order.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.fit.begin(), s.fit.end());
  return s;
}

RowMatrix Gather(const RowMatrix& x, const std::vector<int>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return out;
}

// Generic epoch loop. `targets_for` fills scaled targets for a batch.
GamTrainResult RunEpochs(GamFitter& fitter, const RowMatrix& x, const RowSplit& split,
                         const TrainConfig& config, const MaskSampler& sampler,
                         std::mt19937_64& rng,
                         const std::function<void(const RowMatrix&, std::span<const FeatureSet>,
                                                  std::span<const int>, RowMatrix&)>& targets_for,
                         TrainingObjective objective, const GamEpochCallback& on_epoch) {
  GamTrainResult result;
  const int c = fitter.output_dim();

  // Fixed validation masks and targets.
  RowMatrix vx = Gather(x, split.val);
  std::vector<FeatureSet> vmasks(split.val.size());
  std::mt19937_64 vrng(config.seed + 2);
  for (auto& m : vmasks) m = sampler(vrng);
  RowMatrix vt(vx.rows(), c);
  if (vx.rows() > 0) targets_for(vx, vmasks, split.val, vt);

  auto snapshot = [&]() {
    AdditiveModel m = fitter.Snapshot();
    m.set_objective(objective);
    return m;
  };
  if (on_epoch) on_epoch(0, snapshot());

  std::vector<int> stream;
  for (int rep = 0; rep < config.masks_per_point; ++rep) {
    stream.insert(stream.end(), split.fit.begin(), split.fit.end());
  }
  std::vector<double> best_theta = fitter.theta();
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  // Returns true when training should stop.
  auto after_epoch = [&](int epoch) {
    if (vx.rows() > 0) {
      const double vl = fitter.Unscale(fitter.MeanLoss(vx, vmasks, vt));
      if (!std::isfinite(vl)) throw NumericalError("GAM validation loss is non-finite");
      result.validation_loss.push_back(vl);
      if (vl < best) {
        best = vl;
        best_theta = fitter.theta();
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (on_epoch) on_epoch(epoch, snapshot());
    return config.patience > 0 && since_best >= config.patience;
  };
  auto finish = [&]() {
    if (vx.rows() > 0 && result.best_epoch > 0) fitter.theta() = best_theta;
    if (result.best_epoch < 0) result.best_epoch = static_cast<int>(result.train_loss.size());
    result.model = snapshot();
    return result;
  };
  const auto d = x.cols();

  if (config.optimizer == OptimizerKind::kConjugateGradient) {
    if (!fitter.squared_loss()) {
      throw InvalidArgument("the cg optimizer needs a squared-loss objective");
    }
    if (c > 64) throw InvalidArgument("the cg optimizer supports at most 64 outputs");
    RowMatrix tx(static_cast<Eigen::Index>(stream.size()), d);
    std::vector<FeatureSet> tmasks(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) {
      tx.row(static_cast<Eigen::Index>(i)) = x.row(stream[i]);
      tmasks[i] = sampler(rng);
    }
    RowMatrix tt(tx.rows(), c);
    targets_for(tx, tmasks, stream, tt);
    const double t2 = tt.squaredNorm() / static_cast<double>(tt.size());

    // Preconditioned CG on H θ = b from θ = current parameters.
    std::vector<double>& theta = fitter.theta();
    std::vector<double> b, diag, r, z, p, hp;
    fitter.NormalRhs(tx, tmasks, tt, b);
    fitter.NormalDiagonal(tx, tmasks, diag);
    fitter.NormalApply(tx, tmasks, theta, hp);
    r.resize(b.size());
    z.resize(b.size());
    for (std::size_t q = 0; q < b.size(); ++q) {
      r[q] = b[q] - hp[q];
      z[q] = r[q] / diag[q];
    }
    p = z;
    double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double b_norm = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      fitter.NormalApply(tx, tmasks, p, hp);
      const double php = std::inner_product(p.begin(), p.end(), hp.begin(), 0.0);
      if (!(php > 0.0)) break;
      const double alpha = rz / php;
      for (std::size_t q = 0; q < b.size(); ++q) {
        theta[q] += alpha * p[q];
        r[q] -= alpha * hp[q];
        z[q] = r[q] / diag[q];
      }
      // Data loss: mean |t|²/c - θᵀ(b + r) - penalty.
      double tbr = 0.0;
      for (std::size_t q = 0; q < b.size(); ++q) tbr += theta[q] * (b[q] + r[q]);
      const double loss = t2 - tbr - fitter.Penalty();
      if (!std::isfinite(loss)) throw NumericalError("GAM training diverged (non-finite loss)");
      result.train_loss.push_back(fitter.Unscale(std::max(0.0, loss)));
      const bool stop = after_epoch(epoch);
      const double r_norm = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
      if (stop || r_norm <= 1e-12 * b_norm) break;
      const double rz_next = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t q = 0; q < p.size(); ++q) p[q] = z[q] + beta * p[q];
    }
    return finish();
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(stream.begin(), stream.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < stream.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(stream.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      RowMatrix bx(b, d);
      std::vector<FeatureSet> masks(static_cast<std::size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        bx.row(i) = x.row(stream[start + static_cast<std::size_t>(i)]);
        masks[static_cast<std::size_t>(i)] = sampler(rng);
      }
      RowMatrix bt(b, c);
      targets_for(bx, masks,
                  std::span<const int>(stream.data() + start, static_cast<std::size_t>(b)), bt);
      total += fitter.Step(bx, masks, bt) * static_cast<double>(b);
    }
    result.train_loss.push_back(
        fitter.Unscale(total / static_cast<double>(std::max<std::size_t>(1, stream.size()))));
    fitter.DecayLearningRate();
    if (after_epoch(epoch)) break;
  }
  return finish();
}

std::vector<FeatureInfo> ContinuousFeatures(int d) {
  std::vector<FeatureInfo> f(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) f[j].name = "x" + std::to_string(j + 1);
  return f;
}

}  // namespace

GamTrainResult TrainGam(const MaskedFunction& target, const RowMatrix& x,
                        const std::vector<FeatureSet>& frontier, TrainingObjective objective,
                        const TrainConfig& config, const std::vector<FeatureInfo>* features,
                        const GamEpochCallback& on_epoch, const BasisOptions& basis) {
  config.Validate();
  if (objective != TrainingObjective::kVanilla && objective != TrainingObjective::kInstaShap) {
    throw InvalidArgument("additive models train with the vanilla or instashap objective");
  }
  const int d = target.num_features();
  const int c = target.output_dim();
  if (x.cols() != d) throw InvalidArgument("x dimension mismatch");
  if (x.rows() < 1) throw InvalidArgument("training needs at least one row");
  const std::vector<FeatureInfo> feats = features ? *features : ContinuousFeatures(d);

  std::mt19937_64 rng(config.seed);
  const RowSplit split = SplitRows(static_cast<int>(x.rows()), config.validation_fraction, rng);
  const RowMatrix fx = Gather(x, split.fit);
  AdditiveModel model = BuildAdditiveModel(frontier, fx, feats, c, basis);

  // Intercept from the empty mask (instashap) or the full mask (vanilla).
  const FeatureSet anchor =
      objective == TrainingObjective::kInstaShap ? FeatureSet::Empty() : FeatureSet::Full(d);
  RowMatrix anchor_vals, full_vals;
  target.EvaluateBatch(fx, anchor, anchor_vals);
  if (anchor == FeatureSet::Full(d)) {
    full_vals = anchor_vals;
  } else {
    target.EvaluateBatch(fx, FeatureSet::Full(d), full_vals);
  }
  std::vector<double> mu(static_cast<std::size_t>(c));
  for (int o = 0; o < c; ++o) mu[o] = anchor_vals.col(o).mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < full_vals.rows(); ++i) {
    for (int o = 0; o < c; ++o) ss += (full_vals(i, o) - mu[o]) * (full_vals(i, o) - mu[o]);
  }
  double sigma = std::sqrt(ss / static_cast<double>(full_vals.size()));
  if (!std::isfinite(sigma)) throw NumericalError("target values are non-finite");
  if (sigma < 1e-12) sigma = 1.0;

  model.metadata["removal"] = ToString(target.mode());
  GamFitter fitter(std::move(model), LossKind::kSquared, mu, sigma, config);
  const MaskSampler sampler(d, objective == TrainingObjective::kInstaShap
                                   ? config.masks
                                   : MaskSampling::kFullOnly,
                            config.anchor_probability);
  auto targets_for = [&](const RowMatrix& bx, std::span<const FeatureSet> masks,
                         std::span<const int>, RowMatrix& out) {
    target.EvaluateMasked(bx, masks, out);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (int o = 0; o < c; ++o) out(i, o) = (out(i, o) - mu[o]) / sigma;
    }
  };
  return RunEpochs(fitter, x, split, config, sampler, rng, targets_for, objective, on_epoch);
}

GamTrainResult TrainGamOnLabels(const Dataset& data, const std::vector<FeatureSet>& frontier,
                                const TrainConfig& config, const GamEpochCallback& on_epoch,
                                const BasisOptions& basis) {
  config.Validate();
  const int n = data.num_rows();
  const int d = data.num_features();
  if (n < 1 || d < 1) throw InvalidArgument("training needs data");
  const int c = data.output_dim();
  std::mt19937_64 rng(config.seed);
  const RowSplit split = SplitRows(n, config.validation_fraction, rng);
  const RowMatrix fx = Gather(data.x, split.fit);
  AdditiveModel model = BuildAdditiveModel(frontier, fx, data.features, c, basis);
  model.task = data.task;
  model.class_names = data.class_names;

  std::vector<double> mu(static_cast<std::size_t>(c), 0.0);
  double sigma = 1.0;
  LossKind loss = LossKind::kSquared;
  if (data.task == Task::kClassification) {
    loss = LossKind::kCrossEntropy;
    std::vector<double> counts(static_cast<std::size_t>(c), 1.0);
    for (int r : split.fit) counts[static_cast<std::size_t>(data.y(r, 0))] += 1.0;
    double mean_log = 0.0;
    for (double& v : counts) {
      v = std::log(v);
      mean_log += v / c;
    }
    for (int o = 0; o < c; ++o) mu[o] = counts[o] - mean_log;
  } else {
    double ss = 0.0;
    for (int o = 0; o < c; ++o) {
      for (int r : split.fit) mu[o] += data.y(r, o) / static_cast<double>(split.fit.size());
    }
    for (int r : split.fit) {
      for (int o = 0; o < c; ++o) ss += (data.y(r, o) - mu[o]) * (data.y(r, o) - mu[o]);
    }
    sigma = std::sqrt(ss / static_cast<double>(split.fit.size() * c));
    if (!std::isfinite(sigma)) throw NumericalError("labels are non-finite");
    if (sigma < 1e-12) sigma = 1.0;
  }
  GamFitter fitter(std::move(model), loss, mu, sigma, config);
  const MaskSampler sampler(d, MaskSampling::kFullOnly, 0.0);
  auto targets_for = [&](const RowMatrix&, std::span<const FeatureSet>, std::span<const int> rows,
                         RowMatrix& out) {
    out.resize(static_cast<Eigen::Index>(rows.size()), loss == LossKind::kSquared ? c : 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (loss == LossKind::kCrossEntropy) {
        out(r, 0) = data.y(rows[i], 0);
      } else {
        for (int o = 0; o < c; ++o) out(r, o) = (data.y(rows[i], o) - mu[o]) / sigma;
      }
    }
  };
  return RunEpochs(fitter, data.x, split, config, sampler, rng, targets_for,
                   TrainingObjective::kVanilla, on_epoch);
}

AttributionResult InstantShap(const AdditiveModel& model, std::span<const double> x,
                              IndexFamily family, int k) {
  if (model.objective() != TrainingObjective::kInstaShap) {
    throw InvalidArgument("instant attributions need an instashap-trained model; a " +
                          ToString(model.objective()) +
                          " model's components are not purified");
  }
  if (family == IndexFamily::kArchipelago) {
    throw InvalidArgument("archipelago values are not read from purified components");
  }
  if (k < 1) throw InvalidArgument("order must be at least 1");
  const int d = model.num_features();
  const int c = model.output_dim();
  if (static_cast<int>(x.size()) != d) throw InvalidArgument("x dimension mismatch");

  AttributionResult r;
  r.family = family;
  r.k = k;
  r.d = d;
  r.c = c;
  r.base_value = model.intercept();
  r.point.assign(x.begin(), x.end());
  for (int i = 0; i < d; ++i) r.values[1u << i].assign(static_cast<std::size_t>(c), 0.0);

  std::map<std::pair<int, int>, double> coef;
  auto coefficient = [&](int s, int t) {
    auto key = std::make_pair(s, t);
    auto it = coef.find(key);
    if (it == coef.end()) {
      it = coef.emplace(key, IndexCoefficient(family, s, t, k).ToDouble()).first;
    }
    return it->second;
  };
  std::vector<double> total(static_cast<std::size_t>(c), 0.0);
  std::vector<double> phi(static_cast<std::size_t>(c));
  for (const auto& shape : model.shapes()) {
    std::fill(phi.begin(), phi.end(), 0.0);
    shape.AddTo(x, phi);
    for (int o = 0; o < c; ++o) total[o] += phi[o];
    const int t = shape.subset().size();
    ForEachSubset(shape.subset(), [&](FeatureSet s) {
      if (s.empty() || s.size() > k) return;
      const double w = coefficient(s.size(), t);
      if (w == 0.0) return;
      auto& v = r.values[s.bits()];
      v.resize(static_cast<std::size_t>(c), 0.0);
      for (int o = 0; o < c; ++o) v[o] += w * phi[o];
    });
  }
  if (family != IndexFamily::kSII) {
    r.efficiency_residual.assign(static_cast<std::size_t>(c), 0.0);
    for (const auto& [m, v] : r.values) {
      for (int o = 0; o < c; ++o) r.efficiency_residual[o] += v[o];
    }
    for (int o = 0; o < c; ++o) r.efficiency_residual[o] -= total[o];
  }
  r.metadata["method"] = "instant-frontier";
  r.metadata["frontier_size"] = std::to_string(model.shapes().size() + 1);
  return r;
}

InteractionScorer ParseInteractionScorer(const std::string& name) {
  if (name == "archipelago") return InteractionScorer::kArchipelago;
  if (name == "inclusion") return InteractionScorer::kInclusion;
  throw InvalidArgument("unknown interaction scorer '" + name + "'");
}

FrontierSelection SelectFrontier(const MaskedFunction& target, const RowMatrix& x,
                                 const FrontierSelectionConfig& config) {
  const int d = target.num_features();
  CheckExhaustive(d);
  if (config.rounds < 1 || config.per_round < 1) {
    throw InvalidArgument("rounds and per-round count must be at least 1");
  }
  if (!(config.inclusion_threshold >= 0.0 && config.inclusion_threshold <= 1.0)) {
    throw InvalidArgument("inclusion threshold must lie in [0, 1]");
  }
  if (x.cols() != d || x.rows() < 2) throw InvalidArgument("selection needs >= 2 points of width d");
  const int c = target.output_dim();

  // Scoring points: a seeded subsample in row order.
  std::vector<int> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  if (config.max_points > 0 && static_cast<int>(rows.size()) > config.max_points) {
    std::mt19937_64 rng(config.seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(config.max_points));
    std::sort(rows.begin(), rows.end());
  }
  const RowMatrix pts = Gather(x, rows);
  const auto np = static_cast<std::size_t>(pts.rows());

  std::set<std::uint32_t> current = {0u};
  for (int i = 0; i < d; ++i) current.insert(1u << i);
  FrontierSelection out;
  const FeatureSet full = FeatureSet::Full(d);

  for (int round = 1; round <= config.rounds; ++round) {
    std::set<std::uint32_t> candidates;
    for (std::uint32_t t : current) {
      if (t == 0) continue;
      for (int j = 0; j < d; ++j) {
        const FeatureSet cand = FeatureSet(t).with(j);
        if (cand.bits() == t || cand.size() > config.max_order || current.count(cand.bits())) {
          continue;
        }
        int present = 0;
        for (int i : cand.indices()) present += current.count(cand.without(i).bits()) ? 1 : 0;
        if (static_cast<double>(present) / cand.size() + 1e-12 >= config.inclusion_threshold) {
          candidates.insert(cand.bits());
        }
      }
    }
    if (candidates.empty()) break;

    // Every mask needed for residuals and scores, evaluated once per point.
    std::vector<FeatureSet> masks;
    std::unordered_map<std::uint32_t, std::size_t> slot;
    auto need = [&](FeatureSet s) {
      if (slot.emplace(s.bits(), masks.size()).second) masks.push_back(s);
    };
    need(full);
    for (std::uint32_t t : current) ForEachSubset(FeatureSet(t), need);
    for (std::uint32_t j : candidates) {
      ForEachSubset(FeatureSet(j), [&](FeatureSet u) {
        need(u);
        if (config.scorer == InteractionScorer::kArchipelago) need((full - FeatureSet(j)) | u);
      });
    }
    const std::size_t nm = masks.size();
    RowMatrix vals(static_cast<Eigen::Index>(np * nm), c);
    {
      // Chunked so the repeated-point matrix stays small.
      const std::size_t chunk = std::max<std::size_t>(1, 65536 / nm);
      for (std::size_t p0 = 0; p0 < np; p0 += chunk) {
        const std::size_t p1 = std::min(np, p0 + chunk);
        RowMatrix bx(static_cast<Eigen::Index>((p1 - p0) * nm), d);
        std::vector<FeatureSet> bm((p1 - p0) * nm);
        for (std::size_t p = p0; p < p1; ++p) {
          for (std::size_t m = 0; m < nm; ++m) {
            const auto row = static_cast<Eigen::Index>((p - p0) * nm + m);
            bx.row(row) = pts.row(static_cast<Eigen::Index>(p));
            bm[static_cast<std::size_t>(row)] = masks[m];
          }
        }
        RowMatrix bv;
        target.EvaluateMasked(bx, bm, bv);
        vals.middleRows(static_cast<Eigen::Index>(p0 * nm), bv.rows()) = bv;
      }
    }
    auto value = [&](std::size_t p, FeatureSet s, int o) {
      return vals(static_cast<Eigen::Index>(p * nm + slot.at(s.bits())), o);
    };
    auto mobius = [&](std::size_t p, FeatureSet t, int o, FeatureSet base) {
      // Σ_{U⊆T} (-1)^{|T-U|} f(base ∪ U)
      double acc = 0.0;
      ForEachSubset(t, [&](FeatureSet u) {
        const double sign = ((t.size() - u.size()) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * value(p, base | u, o);
      });
      return acc;
    };

    std::vector<double> resid(np * c);
    for (std::size_t p = 0; p < np; ++p) {
      for (int o = 0; o < c; ++o) {
        double r = value(p, full, o);
        for (std::uint32_t t : current) r -= mobius(p, FeatureSet(t), o, FeatureSet::Empty());
        resid[p * c + o] = r;
      }
    }
    std::vector<FrontierCandidate> scored;
    for (std::uint32_t jb : candidates) {
      const FeatureSet j(jb);
      double score = 0.0;
      for (int o = 0; o < c; ++o) {
        std::vector<double> s(np);
        for (std::size_t p = 0; p < np; ++p) {
          const double inc = mobius(p, j, o, FeatureSet::Empty());
          s[p] = config.scorer == InteractionScorer::kArchipelago
                     ? 0.5 * (inc + mobius(p, j, o, full - j))
                     : inc;
        }
        double ms = 0.0, mr = 0.0;
        for (std::size_t p = 0; p < np; ++p) {
          ms += s[p];
          mr += resid[p * c + o];
        }
        ms /= static_cast<double>(np);
        mr /= static_cast<double>(np);
        double cov = 0.0;
        for (std::size_t p = 0; p < np; ++p) cov += (s[p] - ms) * (resid[p * c + o] - mr);
        score += std::abs(cov / static_cast<double>(np));
      }
      scored.push_back({j, score, round});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.set.bits() < b.set.bits();
    });
    int taken = 0;
    for (const auto& cand : scored) {
      if (taken >= config.per_round || !(cand.score > config.min_score)) break;
      current.insert(cand.set.bits());
      out.accepted.push_back(cand);
      ++taken;
    }
    if (taken == 0) break;
  }
  std::vector<FeatureSet> sets;
  for (std::uint32_t t : current) sets.emplace_back(t);
  out.frontier = NormalizeFrontier(sets, d);
  return out;
}

}  // namespace instashap
