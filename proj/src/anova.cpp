#include "instashap/anova.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace instashap {

PurifiedTable PurifyAt(const MaskedFunction& f, std::span<const double> x) {
  return MobiusPurify(f.Table(x));
}

PointSampler SamplerOf(const PairsGaussian& world) {
  return [world](std::mt19937_64& rng, std::span<double> out) {
    world.SampleInto(rng, out);
  };
}

namespace {

// Purified values for rows [begin, end): out(i - begin, S) = f~_S(x_i) for
// output o, and full(i - begin) = F(x_i).
void PurifiedChunk(const MaskedFunction& f, const FullModel* model,
                   const RowMatrix& samples, Eigen::Index begin, Eigen::Index end,
                   int o, Eigen::MatrixXd& out, std::vector<double>& full) {
  const int d = f.num_features();
  const Eigen::Index nsub = Eigen::Index{1} << d;
  const Eigen::Index rows = end - begin;
  RowMatrix xs(rows * nsub, d);
  std::vector<FeatureSet> masks(static_cast<std::size_t>(rows * nsub));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index m = 0; m < nsub; ++m) {
      xs.row(i * nsub + m) = samples.row(begin + i);
      masks[static_cast<std::size_t>(i * nsub + m)] =
          FeatureSet(static_cast<std::uint32_t>(m));
    }
  }
  RowMatrix vals;
  f.EvaluateMasked(xs, masks, vals);
  out.resize(rows, nsub);
  full.resize(static_cast<std::size_t>(rows));
  std::vector<double> buf(static_cast<std::size_t>(model ? model->c : 0));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index m = 0; m < nsub; ++m) out(i, m) = vals(i * nsub + m, o);
    if (model) {
      model->fn(Row(samples, begin + i), buf);
      full[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(o)];
    } else {
      full[static_cast<std::size_t>(i)] = out(i, nsub - 1);
    }
    // In-place Möbius transform of the row.
    for (int b = 0; b < d; ++b) {
      const Eigen::Index bit = Eigen::Index{1} << b;
      for (Eigen::Index m = 0; m < nsub; ++m) {
        if (m & bit) out(i, m) -= out(i, m ^ bit);
      }
    }
  }
}

struct Moments {
  long double s1 = 0.0L;
  long double s2 = 0.0L;
  void Add(double v) {
    s1 += v;
    s2 += static_cast<long double>(v) * v;
  }
  double Mean(long n) const { return static_cast<double>(s1 / n); }
  double Se(long n) const {
    if (n < 2) return 0.0;
    const long double mean = s1 / n;
    const long double var = std::max(0.0L, (s2 / n - mean * mean)) * n / (n - 1.0L);
    return static_cast<double>(std::sqrt(var / n));
  }
};

}  // namespace

SobolReport SobolAnalysis(const MaskedFunction& f, const RowMatrix& samples,
                          const FullModel* full, int output) {
  const int d = f.num_features();
  CheckExhaustive(d);
  if (samples.cols() != d) throw InvalidArgument("sample width mismatch");
  const long n = static_cast<long>(samples.rows());
  if (n < 2) throw InvalidArgument("Sobol analysis needs at least two samples");
  if (output < 0 || output >= f.output_dim()) throw InvalidArgument("output out of range");
  const std::size_t nsub = std::size_t{1} << d;
  const Eigen::Index chunk =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>((1u << 16) / nsub));

  // Keep the purified rows in memory when small enough, otherwise recompute
  // them in the second pass.
  const bool store = static_cast<double>(n) * nsub <= static_cast<double>(1u << 22);
  Eigen::MatrixXd stored;
  std::vector<double> stored_full;
  if (store) {
    stored.resize(n, static_cast<Eigen::Index>(nsub));
    stored_full.resize(static_cast<std::size_t>(n));
  }

  std::vector<long double> sum(nsub, 0.0L);
  long double sum_f = 0.0L;
  Eigen::MatrixXd block;
  std::vector<double> fvals;
  for (Eigen::Index b = 0; b < n; b += chunk) {
    const Eigen::Index e = std::min<Eigen::Index>(n, b + chunk);
    PurifiedChunk(f, full, samples, b, e, output, block, fvals);
    for (Eigen::Index i = 0; i < e - b; ++i) {
      for (std::size_t m = 0; m < nsub; ++m) sum[m] += block(i, static_cast<Eigen::Index>(m));
      sum_f += fvals[static_cast<std::size_t>(i)];
    }
    if (store) {
      stored.middleRows(b, e - b) = block;
      std::copy(fvals.begin(), fvals.end(), stored_full.begin() + b);
    }
  }
  std::vector<double> mean(nsub);
  for (std::size_t m = 0; m < nsub; ++m) mean[m] = static_cast<double>(sum[m] / n);
  const double mean_f = static_cast<double>(sum_f / n);

  std::vector<Moments> var_acc(nsub), cov_acc(nsub), unc_acc(nsub);
  Moments vf, ef2, gap_v, gap_c, gap_u;
  for (Eigen::Index b = 0; b < n; b += chunk) {
    const Eigen::Index e = std::min<Eigen::Index>(n, b + chunk);
    if (store) {
      block = stored.middleRows(b, e - b);
      fvals.assign(stored_full.begin() + b, stored_full.begin() + e);
    } else {
      PurifiedChunk(f, full, samples, b, e, output, block, fvals);
    }
    for (Eigen::Index i = 0; i < e - b; ++i) {
      const double fv = fvals[static_cast<std::size_t>(i)];
      const double fc = fv - mean_f;
      double zv = 0.0, zc = 0.0, zu = 0.0;
      for (std::size_t m = 0; m < nsub; ++m) {
        const double p = block(i, static_cast<Eigen::Index>(m));
        const double pc = p - mean[m];
        var_acc[m].Add(pc * pc);
        cov_acc[m].Add(fc * pc);
        unc_acc[m].Add(fv * p);
        zv += pc * pc;
        zc += fc * pc;
        zu += fv * p;
      }
      vf.Add(fc * fc);
      ef2.Add(fv * fv);
      gap_v.Add(zv - fc * fc);
      gap_c.Add(zc - fc * fc);
      gap_u.Add(zu - fv * fv);
    }
  }

  SobolReport r;
  r.d = d;
  r.n = n;
  r.variance.resize(nsub);
  r.variance_se.resize(nsub);
  r.covariance.resize(nsub);
  r.covariance_se.resize(nsub);
  r.uncentered.resize(nsub);
  r.uncentered_se.resize(nsub);
  for (std::size_t m = 0; m < nsub; ++m) {
    r.variance[m] = var_acc[m].Mean(n);
    r.variance_se[m] = var_acc[m].Se(n);
    r.covariance[m] = cov_acc[m].Mean(n);
    r.covariance_se[m] = cov_acc[m].Se(n);
    r.uncentered[m] = unc_acc[m].Mean(n);
    r.uncentered_se[m] = unc_acc[m].Se(n);
  }
  r.total_variance = vf.Mean(n);
  r.total_variance_se = vf.Se(n);
  r.second_moment = ef2.Mean(n);
  r.second_moment_se = ef2.Se(n);
  r.variance_sum_gap = gap_v.Mean(n);
  r.variance_sum_gap_se = gap_v.Se(n);
  r.covariance_sum_gap = gap_c.Mean(n);
  r.covariance_sum_gap_se = gap_c.Se(n);
  r.uncentered_sum_gap = gap_u.Mean(n);
  r.uncentered_sum_gap_se = gap_u.Se(n);
  r.degenerate = r.total_variance <= 1e-14 * std::max(1.0, r.second_moment);
  return r;
}

namespace {

RowMatrix DrawSamples(int d, const PointSampler& sampler, long n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample count must be positive");
  std::mt19937_64 rng(seed);
  RowMatrix x(n, d);
  for (long i = 0; i < n; ++i) sampler(rng, Row(x, i));
  return x;
}

}  // namespace

SobolReport SobolIndices(const MaskedFunction& f, const PointSampler& sampler, long n,
                         std::uint64_t seed) {
  return SobolAnalysis(f, DrawSamples(f.num_features(), sampler, n, seed));
}

SobolReport SobolCovariances(const FullModel& full, const MaskedFunction& f,
                             const PointSampler& sampler, long n, std::uint64_t seed) {
  if (full.d != f.num_features()) throw InvalidArgument("model dimension mismatch");
  return SobolAnalysis(f, DrawSamples(f.num_features(), sampler, n, seed), &full);
}

bool WithinStandardErrors(double gap, double se, double z, double scale) {
  // Rounding floor for identities that hold sample by sample.
  const double floor = 1e-9 * std::max(1.0, std::abs(scale));
  return std::abs(gap) <= z * se + floor;
}

std::string ToString(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::kSynergy: return "synergy";
    case InteractionKind::kRedundancy: return "redundancy";
    case InteractionKind::kNone: return "none";
  }
  return "unknown";
}

InteractionKind ClassifyInteraction(double variance, double covariance,
                                    double threshold) {
  if (!(variance > threshold)) return InteractionKind::kNone;
  if (covariance > 0.0) return InteractionKind::kSynergy;
  if (covariance < 0.0) return InteractionKind::kRedundancy;
  return InteractionKind::kNone;
}

InteractionKind ClassifyInteraction(const SobolReport& report, FeatureSet s) {
  return ClassifyInteraction(report.variance[s.bits()], report.covariance[s.bits()],
                             3.0 * report.variance_se[s.bits()]);
}

std::vector<FeatureSet> MaximalElements(const std::vector<FeatureSet>& sets) {
  std::vector<FeatureSet> uniq;
  for (FeatureSet s : sets) {
    if (!s.empty()) uniq.push_back(s);
  }
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<FeatureSet> out;
  for (FeatureSet s : uniq) {
    bool dominated = false;
    for (FeatureSet t : uniq) {
      if (t != s && s.is_subset_of(t)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.push_back(s);
  }
  return out;
}

double FrontierSolution::Component(FeatureSet t, std::span<const double> x) const {
  for (std::size_t j = 0; j < frontier.size(); ++j) {
    if (frontier[j] == t) return components[j].Evaluate(x);
  }
  return 0.0;
}

double FrontierSolution::Predict(std::span<const double> x) const {
  double v = intercept;
  for (const auto& g : components) v += g.Evaluate(x);
  return v;
}

FrontierSolution NeumannFrontierSolve(const Polynomial& target,
                                      const PairsGaussian& world,
                                      const std::vector<FeatureSet>& frontier,
                                      int max_sweeps, SweepOrder order, double tol) {
  const int d = world.num_features();
  if (target.num_vars() != d) throw InvalidArgument("target dimension mismatch");
  if (max_sweeps < 0) throw InvalidArgument("sweep count must be non-negative");
  FrontierSolution sol;
  sol.frontier = MaximalElements(frontier);
  for (FeatureSet t : sol.frontier) {
    if (!t.fits(d)) throw InvalidArgument("frontier set outside [d]");
  }
  sol.intercept = world.Expectation(target);
  const Polynomial centered = target - Polynomial::Constant(d, sol.intercept);
  sol.components.assign(sol.frontier.size(), Polynomial(d));

  auto residual_poly = [&]() {
    Polynomial r = centered;
    for (const auto& g : sol.components) r -= g;
    r.Prune(1e-15);
    return r;
  };
  auto residual_norm = [&](const Polynomial& r) {
    return std::sqrt(std::max(0.0, world.Expectation(r * r)));
  };

  sol.residual_trace.push_back(residual_norm(centered));
  Polynomial previous_fit(d);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (order == SweepOrder::kGaussSeidel) {
      for (std::size_t j = 0; j < sol.frontier.size(); ++j) {
        Polynomial partial = residual_poly() + sol.components[j];
        Polynomial g = world.ConditionalExpectation(partial, sol.frontier[j]);
        g.Prune(1e-15);
        sol.components[j] = std::move(g);
      }
    } else {
      const Polynomial r = residual_poly();
      std::vector<Polynomial> next;
      for (std::size_t j = 0; j < sol.frontier.size(); ++j) {
        Polynomial g = world.ConditionalExpectation(r + sol.components[j], sol.frontier[j]);
        g.Prune(1e-15);
        next.push_back(std::move(g));
      }
      sol.components = std::move(next);
    }
    sol.sweeps = sweep + 1;
    Polynomial fit(d);
    for (const auto& g : sol.components) fit += g;
    const Polynomial step = fit - previous_fit;
    previous_fit = std::move(fit);
    sol.residual_trace.push_back(residual_norm(residual_poly()));
    if (residual_norm(step) <= tol) {
      sol.converged = true;
      break;
    }
  }
  sol.residual = sol.residual_trace.back();
  return sol;
}

namespace {

// Indices of the k nearest rows to each row, measured on the coordinates in t
// (each standardized by its sample deviation).
std::vector<std::vector<int>> NeighbourLists(const RowMatrix& x, FeatureSet t, int k) {
  const auto n = static_cast<int>(x.rows());
  const auto idx = t.indices();
  std::vector<double> scale;
  for (int c : idx) {
    const auto col = x.col(c);
    const double mu = col.mean();
    const double sd = std::sqrt((col.array() - mu).square().mean());
    scale.push_back(sd > 1e-12 ? 1.0 / sd : 1.0);
  }
  k = std::min(k, n);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t a = 0; a < idx.size(); ++a) {
        const double diff = (x(i, idx[a]) - x(j, idx[a])) * scale[a];
        d2 += diff * diff;
      }
      dist[static_cast<std::size_t>(j)] = {d2, j};
    }
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    auto& list = out[static_cast<std::size_t>(i)];
    for (int a = 0; a < k; ++a) list.push_back(dist[static_cast<std::size_t>(a)].second);
    std::sort(list.begin(), list.end());
  }
  return out;
}

}  // namespace

EmpiricalFrontierSolution NeumannFrontierSolveEmpirical(
    const RowMatrix& x, std::span<const double> y,
    const std::vector<FeatureSet>& frontier, int max_sweeps, int neighbours,
    SweepOrder order, double tol) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n || n < 2) throw InvalidArgument("need matching x/y with n >= 2");
  if (neighbours < 1) throw InvalidArgument("neighbour count must be positive");
  EmpiricalFrontierSolution sol;
  sol.frontier = MaximalElements(frontier);
  sol.intercept = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<std::vector<std::vector<int>>> nbrs;
  for (FeatureSet t : sol.frontier) {
    if (!t.fits(static_cast<int>(x.cols()))) throw InvalidArgument("frontier set outside [d]");
    nbrs.push_back(NeighbourLists(x, t, neighbours));
  }
  sol.fitted.assign(sol.frontier.size(), std::vector<double>(n, 0.0));

  auto residuals = [&]() {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = y[i] - sol.intercept;
      for (const auto& g : sol.fitted) v -= g[i];
      r[i] = v;
    }
    return r;
  };
  auto rms = [&](const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s / static_cast<double>(n));
  };
  auto smooth = [&](std::size_t j, const std::vector<double>& partial) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int nb : nbrs[j][i]) s += partial[static_cast<std::size_t>(nb)];
      g[i] = s / static_cast<double>(nbrs[j][i].size());
    }
    const double mu = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(n);
    for (double& v : g) v -= mu;
    return g;
  };

  sol.residual_trace.push_back(rms(residuals()));
  std::vector<double> previous_fit(n, 0.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (order == SweepOrder::kGaussSeidel) {
      for (std::size_t j = 0; j < sol.frontier.size(); ++j) {
        std::vector<double> partial = residuals();
        for (std::size_t i = 0; i < n; ++i) partial[i] += sol.fitted[j][i];
        sol.fitted[j] = smooth(j, partial);
      }
    } else {
      const std::vector<double> r = residuals();
      std::vector<std::vector<double>> next;
      for (std::size_t j = 0; j < sol.frontier.size(); ++j) {
        std::vector<double> partial = r;
        for (std::size_t i = 0; i < n; ++i) partial[i] += sol.fitted[j][i];
        next.push_back(smooth(j, partial));
      }
      sol.fitted = std::move(next);
    }
    sol.sweeps = sweep + 1;
    std::vector<double> step(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (const auto& g : sol.fitted) v += g[i];
      step[i] = v - previous_fit[i];
      previous_fit[i] = v;
    }
    sol.residual_trace.push_back(rms(residuals()));
    if (rms(step) <= tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

}  // namespace instashap
