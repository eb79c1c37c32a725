#include "instashap/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "instashap/parallel.hpp"
#include "instashap/serialize.hpp"

namespace instashap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string Join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

json Finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Rows of fn(i) computed in parallel; fn fills one row of width `cols`.
RowMatrix ParallelRows(Eigen::Index n, Eigen::Index cols,
                       const std::function<void(Eigen::Index, std::span<double>)>& fn) {
  RowMatrix out(n, cols);
  ParallelFor(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) fn(static_cast<Eigen::Index>(i), Row(out, i));
  });
  return out;
}

RowMatrix ExactShapleyMatrix(const MaskedFunction& f, const RowMatrix& x) {
  const int d = f.num_features();
  const int c = f.output_dim();
  return ParallelRows(x.rows(), d * c, [&](Eigen::Index i, std::span<double> row) {
    const auto r = ShapleyExact(f, Row(x, i));
    for (int j = 0; j < d; ++j)
      for (int o = 0; o < c; ++o) row[j * c + o] = r.value(FeatureSet::Singleton(j), o);
  });
}

RowMatrix InstantShapMatrix(const AdditiveModel& m, const RowMatrix& x) {
  const int d = m.num_features();
  const int c = m.output_dim();
  return ParallelRows(x.rows(), d * c, [&](Eigen::Index i, std::span<double> row) {
    const auto r = InstantShap(m, Row(x, i));
    for (int j = 0; j < d; ++j)
      for (int o = 0; o < c; ++o) row[j * c + o] = r.value(FeatureSet::Singleton(j), o);
  });
}

MetricSeries LossSeries(const std::string& name, const std::vector<double>& loss) {
  MetricSeries s;
  s.name = name;
  for (std::size_t e = 0; e < loss.size(); ++e) s.Add(static_cast<double>(e + 1), loss[e]);
  return s;
}

void WriteMatrixJson(const std::string& path, const std::vector<std::string>& columns,
                     const RowMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(Finite(m(i, j)));
    rows.push_back(std::move(r));
  }
  WriteJson(path, {{"columns", columns}, {"rows", std::move(rows)}});
}

std::string ShapeFileName(const std::string& prefix, FeatureSet t,
                          const std::vector<FeatureInfo>& features) {
  std::string name = prefix;
  for (int i : t.indices()) {
    std::string f = i < static_cast<int>(features.size()) && !features[i].name.empty()
                        ? features[i].name
                        : "x" + std::to_string(i + 1);
    for (char& ch : f) {
      if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
    }
    name += "_" + f;
  }
  return name + ".csv";
}

}  // namespace

void PrepareOutputDir(const std::string& out) {
  if (out.empty()) throw InvalidArgument("output directory is required");
  std::error_code ec;
  for (const char* sub : {"metrics", "shapes", "attributions", "models"}) {
    fs::create_directories(fs::path(out) / sub, ec);
    if (ec) throw InvalidArgument("cannot create '" + out + "/" + sub + "': " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// synth2d

void Synth2dConfig::Validate() const {
  if (!(std::abs(rho) <= 1.0)) throw InvalidArgument("rho must lie in [-1, 1]");
  if (grid < 2) throw InvalidArgument("grid needs at least 2 points per axis");
  if (!(grid_range > 0.0)) throw InvalidArgument("grid range must be positive");
  if (train_points < 10 || probe_points < 1 || sobol_samples < 100) {
    throw InvalidArgument("sample counts are too small");
  }
  if (iterations < 0 || masks_per_point < 1) throw InvalidArgument("invalid solver budget");
}

json Synth2dConfig::ToJson() const {
  return {{"rho", rho},
          {"grid", grid},
          {"grid_range", grid_range},
          {"train_points", train_points},
          {"iterations", iterations},
          {"masks_per_point", masks_per_point},
          {"smoothness", smoothness},
          {"probe_points", probe_points},
          {"sobol_samples", sobol_samples},
          {"seed", seed}};
}

Synth2dResult RunSynth2d(const Synth2dConfig& config) {
  config.Validate();
  Synth2dResult r;
  r.config = config;
  const PairsGaussian world(2, config.rho);
  const ExactConditionalRemoval f(TwoFeatureExampleTarget(), world);
  r.degenerate = world.degenerate();
  if (r.degenerate) {
    r.warnings.push_back(
        "|rho| = 1: each feature determines the other, the conditional distribution is a point "
        "mass and the purified components are only identified on the diagonal");
  }

  TrainConfig tc;
  tc.optimizer = OptimizerKind::kConjugateGradient;
  tc.epochs = config.iterations;
  tc.masks_per_point = config.masks_per_point;
  tc.smoothness = config.smoothness;
  tc.validation_fraction = 0.0;
  tc.seed = config.seed;
  const RowMatrix x = world.Sample(config.train_points, config.seed);
  const FeatureSet s1(1u), s2(2u), s12(3u);
  auto trained = TrainGam(f, x, {s1, s2, s12}, TrainingObjective::kInstaShap, tc);
  r.model = std::move(trained.model);
  r.model.metadata["world"] = "pairs-gaussian d=2 rho=" + std::to_string(config.rho);
  r.model.metadata["target"] = "x + x*y";
  r.train_loss = std::move(trained.train_loss);

  // Exact purified components and Shapley values against the learned ones.
  // Columns: x, y, f1 (exact, learned), f2, f12, phi_x (exact, instant), phi_y.
  auto compare = [&](std::span<const double> p, std::span<double> row) {
    const PurifiedTable exact = PurifyAt(f, p);
    const AttributionResult phi = ShapleyExact(f, p);
    const AttributionResult inst = InstantShap(r.model, p);
    row[0] = p[0];
    row[1] = p[1];
    int col = 2;
    for (FeatureSet t : {s1, s2, s12}) {
      row[col++] = exact.value(t);
      row[col++] = (*r.model.Find(t))(p)[0];
    }
    for (FeatureSet t : {s1, s2}) {
      row[col++] = phi.value(t);
      row[col++] = inst.value(t);
    }
  };
  const int g = config.grid;
  r.grid = ParallelRows(static_cast<Eigen::Index>(g) * g, 12, [&](Eigen::Index i, auto row) {
    const double step = 2.0 * config.grid_range / (g - 1);
    const double p[2] = {-config.grid_range + step * static_cast<double>(i / g),
                         -config.grid_range + step * static_cast<double>(i % g)};
    compare(p, row);
  });
  const RowMatrix probes = world.Sample(config.probe_points, config.seed + 1);
  const RowMatrix dens = ParallelRows(probes.rows(), 12, [&](Eigen::Index i, auto row) {
    compare(Row(probes, i), row);
  });
  Eigen::VectorXd weight = Eigen::VectorXd::Ones(r.grid.rows());
  if (!r.degenerate) {
    const double q = 2.0 * (1.0 - config.rho * config.rho);
    for (Eigen::Index i = 0; i < r.grid.rows(); ++i) {
      const double a = r.grid(i, 0), b = r.grid(i, 1);
      weight[i] = std::exp(-(a * a - 2.0 * config.rho * a * b + b * b) / q);
    }
  }
  weight /= weight.sum();
  const char* names[] = {"f1", "f2", "f12", "shap_x", "shap_y"};
  for (int k = 0; k < 5; ++k) {
    ComponentError e;
    e.name = names[k];
    const Eigen::VectorXd diff = r.grid.col(2 + 2 * k) - r.grid.col(3 + 2 * k);
    e.grid_mse = weight.dot(diff.cwiseAbs2());
    e.uniform_grid_mse = diff.squaredNorm() / static_cast<double>(diff.size());
    e.density_rmse =
        std::sqrt((dens.col(2 + 2 * k) - dens.col(3 + 2 * k)).squaredNorm() / dens.rows());
    if (k < 3) {
      r.max_purified_grid_mse = std::max(r.max_purified_grid_mse, e.grid_mse);
      r.max_component_density_rmse = std::max(r.max_component_density_rmse, e.density_rmse);
    }
    r.errors.push_back(e);
  }

  r.sobol = SobolCovariances(ModelOfTarget(TwoFeatureExampleTarget()), f, SamplerOf(world),
                             config.sobol_samples, config.seed + 2);
  for (std::uint32_t m = 1; m < 4; ++m) {
    const double se = std::hypot(r.sobol.variance_se[m], r.sobol.covariance_se[m]);
    const double diff = std::abs(r.sobol.variance[m] - r.sobol.covariance[m]);
    const double z = se > 0 ? diff / se : (diff > 1e-12 ? INFINITY : 0.0);
    r.max_variance_covariance_z = std::max(r.max_variance_covariance_z, z);
  }
  return r;
}

json Synth2dResult::Summary() const {
  json errs = json::object();
  for (const auto& e : errors) {
    errs[e.name] = {{"grid_mse", Finite(e.grid_mse)},
                    {"uniform_grid_mse", Finite(e.uniform_grid_mse)},
                    {"density_rmse", Finite(e.density_rmse)}};
  }
  return {{"command", "synth2d"},
          {"rho", config.rho},
          {"degenerate_conditional", degenerate},
          {"errors", std::move(errs)},
          {"max_purified_grid_mse", Finite(max_purified_grid_mse)},
          {"max_component_density_rmse", Finite(max_component_density_rmse)},
          {"final_train_loss", train_loss.empty() ? json(nullptr) : Finite(train_loss.back())},
          {"sobol", ToJson(sobol)},
          {"variance_vs_covariance",
           {{"max_z", Finite(max_variance_covariance_z)},
            {"equal_within_mc_error", max_variance_covariance_z <= 3.0}}},
          {"warnings", warnings}};
}

void WriteSynth2dArtifacts(const Synth2dResult& r, const std::string& out) {
  PrepareOutputDir(out);
  WriteJson(Join(out, "config.json"), {{"command", "synth2d"}, {"config", r.config.ToJson()}});
  LossSeries("train_loss", r.train_loss).WriteCsv(Join(out, "metrics/train_loss.csv"));

  const int g = r.config.grid;
  auto write = [&](const std::string& name, bool pair, int col) {
    std::ofstream os(Join(out, "shapes/" + name + ".csv"));
    os << std::setprecision(17) << (pair ? "x,y" : name == "f2" ? "y" : "x")
       << ",exact,learned\n";
    for (Eigen::Index i = 0; i < r.grid.rows(); ++i) {
      const bool first_of_row = i % g == 0;
      const bool first_row = i < g;
      if (!pair && name == "f1" && !first_of_row) continue;
      if (!pair && name == "f2" && !first_row) continue;
      if (pair) os << r.grid(i, 0) << "," << r.grid(i, 1);
      else os << r.grid(i, name == "f2" ? 1 : 0);
      os << "," << r.grid(i, col) << "," << r.grid(i, col + 1) << "\n";
    }
    if (!os) throw InvalidArgument("failed writing shape grid " + name);
  };
  write("f1", false, 2);
  write("f2", false, 4);
  write("f12", true, 6);

  RowMatrix phi(r.grid.rows(), 6);
  phi << r.grid.col(0), r.grid.col(1), r.grid.col(8), r.grid.col(9), r.grid.col(10),
      r.grid.col(11);
  WriteMatrixJson(Join(out, "attributions/shapley_grid.json"),
                  {"x", "y", "phi_x_exact", "phi_x_instant", "phi_y_exact", "phi_y_instant"},
                  phi);
  WriteFileBytes(Join(out, "models/instashap_gam.json"), SerializeModel(r.model));
  WriteJson(Join(out, "report.json"), r.Summary());
}

// ---------------------------------------------------------------------------
// synth10d

std::string ToString(ExplainerMethod m) {
  return m == ExplainerMethod::kFastShap ? "fastshap" : "instashap";
}

ExplainerMethod ParseExplainerMethod(const std::string& name) {
  if (name == "fastshap") return ExplainerMethod::kFastShap;
  if (name == "instashap") return ExplainerMethod::kInstaShap;
  throw InvalidArgument("unknown method '" + name + "' (expected fastshap|instashap)");
}

std::string ToString(BenchmarkTarget t) {
  return t == BenchmarkTarget::kExactOracle ? "oracle" : "surrogate";
}

BenchmarkTarget ParseBenchmarkTarget(const std::string& name) {
  if (name == "oracle") return BenchmarkTarget::kExactOracle;
  if (name == "surrogate") return BenchmarkTarget::kSurrogate;
  throw InvalidArgument("unknown target '" + name + "' (expected oracle|surrogate)");
}

void Synth10dConfig::Validate() const {
  if (d < 2 || d % 2 != 0 || d > 20) throw InvalidArgument("d must be even and in [2, 20]");
  if (!(std::abs(rho) < 1.0)) throw InvalidArgument("rho must lie in (-1, 1)");
  if (kstar < 1 || 2 * kstar > kMaxShapeOrder || kstar > d) {
    throw InvalidArgument("kstar must be 1 or 2");
  }
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (train_points < 2 || eval_points < 1) throw InvalidArgument("sample counts too small");
  if (batch_size < 1 || masks_per_point < 1) throw InvalidArgument("invalid batch settings");
  if (!(gam_learning_rate > 0.0) || !(head_learning_rate > 0.0)) {
    throw InvalidArgument("learning rates must be positive");
  }
}

json Synth10dConfig::ToJson() const {
  return {{"d", d},
          {"rho", rho},
          {"kstar", kstar},
          {"dist", dist == CoefficientDistribution::kNormal ? "normal" : "laplace"},
          {"method", instashap::ToString(method)},
          {"target", instashap::ToString(target)},
          {"epochs", epochs},
          {"train_points", train_points},
          {"eval_points", eval_points},
          {"batch_size", batch_size},
          {"gam_learning_rate", gam_learning_rate},
          {"head_learning_rate", head_learning_rate},
          {"lr_decay", lr_decay},
          {"gam_optimizer", instashap::ToString(gam_optimizer)},
          {"knots_by_order", basis.knots_by_order},
          {"masks_per_point", masks_per_point},
          {"head_hidden", head_hidden},
          {"surrogate_epochs", surrogate_epochs},
          {"seed", seed}};
}

std::vector<FeatureSet> BenchmarkFrontier(int d, int kstar) {
  return PairBlockFrontier(d, kstar, std::min(2 * kstar, kMaxShapeOrder));
}

Synth10dResult RunSynth10d(const Synth10dConfig& config) {
  config.Validate();
  const auto t0 = std::chrono::steady_clock::now();
  Synth10dResult r;
  r.config = config;
  const int d = config.d;
  const PairsGaussian world(d, config.rho);
  const MultilinearTarget target =
      MakeMultilinearTarget(d, config.kstar, config.dist, config.seed, world);
  const ExactConditionalRemoval oracle(target, world);
  const RowMatrix x = world.Sample(config.train_points, config.seed + 1);
  const RowMatrix xe = world.Sample(config.eval_points, config.seed + 2);

  SurrogateModel surrogate;
  const MaskedFunction* explained = &oracle;
  if (config.target == BenchmarkTarget::kSurrogate) {
    RowMatrix y(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, 0) = target.Evaluate(Row(x, i));
    SurrogateConfig sc;
    sc.epochs = config.surrogate_epochs;
    sc.seed = config.seed + 3;
    surrogate = TrainSurrogate(MakeRegressionDataset(x, y), ShapUniformWeights(d), sc);
    explained = &surrogate;
  }
  const RowMatrix true_phi = ExactShapleyMatrix(oracle, xe);
  const RowMatrix model_phi =
      explained == &oracle ? true_phi : ExactShapleyMatrix(*explained, xe);

  r.model_shap_mse.name = "model_shap_mse";
  r.model_shap_nmse.name = "model_shap_nmse";
  r.true_shap_mse.name = "true_shap_mse";
  auto record = [&](int epoch, const RowMatrix& phi) {
    const auto m = ShapMse(phi, model_phi);
    r.model_shap_mse.Add(epoch, m.mse);
    r.model_shap_nmse.Add(epoch, m.normalized);
    r.true_shap_mse.Add(epoch, ShapMse(phi, true_phi).mse);
  };

  if (config.method == ExplainerMethod::kInstaShap) {
    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.learning_rate = config.gam_learning_rate;
    tc.lr_decay = config.lr_decay;
    tc.optimizer = config.gam_optimizer;
    tc.masks_per_point = config.masks_per_point;
    tc.validation_fraction = 0.0;
    tc.seed = config.seed + 4;
    auto res = TrainGam(*explained, x, BenchmarkFrontier(d, config.kstar),
                        TrainingObjective::kInstaShap, tc, nullptr,
                        [&](int epoch, const AdditiveModel& m) {
                          record(epoch, InstantShapMatrix(m, xe));
                        },
                        config.basis);
    r.gam = std::move(res.model);
    r.num_params = r.gam.num_params();
    r.train_loss = LossSeries("train_loss", res.train_loss);
  } else {
    RowMatrix gain(xe.rows(), 1);
    for (Eigen::Index i = 0; i < xe.rows(); ++i) {
      gain(i, 0) = (*explained)(Row(xe, i), FeatureSet::Full(d))[0] -
                   (*explained)(Row(xe, i), FeatureSet::Empty())[0];
    }
    FastShapConfig fc;
    fc.hidden = config.head_hidden;
    fc.epochs = config.epochs;
    fc.batch_size = config.batch_size;
    fc.learning_rate = config.head_learning_rate;
    fc.lr_decay = config.lr_decay;
    fc.masks_per_point = config.masks_per_point;
    fc.validation_fraction = 0.0;
    fc.seed = config.seed + 4;
    auto res = TrainFastShap(*explained, x, 1, fc, nullptr,
                             [&](int epoch, const AmortizedHead& h) {
                               record(epoch, h.ExplainBatch(xe, gain).leftCols(d));
                             });
    r.head = std::move(res.head);
    r.num_params = r.head.net().num_params();
    r.train_loss = LossSeries("train_loss", res.train_loss);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

json Synth10dResult::Summary() const {
  auto first_last = [](const MetricSeries& s) {
    return json{{"initial", s.values.empty() ? json(nullptr) : Finite(s.values.front())},
                {"final", s.values.empty() ? json(nullptr) : Finite(s.values.back())},
                {"decreased", s.Decreased()}};
  };
  return {{"command", "synth10d"},
          {"method", ToString(config.method)},
          {"target", ToString(config.target)},
          {"rho", config.rho},
          {"kstar", config.kstar},
          {"epochs", config.epochs},
          {"num_params", num_params},
          {"model_shap_mse", first_last(model_shap_mse)},
          {"model_shap_nmse", first_last(model_shap_nmse)},
          {"true_shap_mse", first_last(true_shap_mse)}};
}

void WriteSynth10dArtifacts(const std::vector<Synth10dResult>& runs, const std::string& out) {
  if (runs.empty()) throw InvalidArgument("no benchmark runs to write");
  PrepareOutputDir(out);
  json configs = json::array();
  json summaries = json::array();
  for (const auto& r : runs) {
    configs.push_back(r.config.ToJson());
    summaries.push_back(r.Summary());
    const std::string m = ToString(r.config.method);
    r.model_shap_mse.WriteCsv(Join(out, "metrics/" + m + "_model_shap_mse.csv"));
    r.model_shap_nmse.WriteCsv(Join(out, "metrics/" + m + "_model_shap_nmse.csv"));
    r.true_shap_mse.WriteCsv(Join(out, "metrics/" + m + "_true_shap_mse.csv"));
    if (!r.train_loss.values.empty()) {
      r.train_loss.WriteCsv(Join(out, "metrics/" + m + "_train_loss.csv"));
    }
    if (r.config.method == ExplainerMethod::kInstaShap) {
      WriteFileBytes(Join(out, "models/instashap_gam.json"), SerializeModel(r.gam));
      for (const auto& s : r.gam.shapes()) {
        if (s.subset().size() <= 2) {
          WriteShapeCsv(r.gam, s, Join(out, "shapes/" + ShapeFileName("shape", s.subset(), {})));
        }
      }
    } else {
      WriteFileBytes(Join(out, "models/fastshap_head.json"), SerializeModel(r.head));
    }
  }
  WriteJson(Join(out, "config.json"), {{"command", "synth10d"}, {"runs", configs}});
  json report = {{"command", "synth10d"}, {"runs", summaries}};
  const Synth10dResult* insta = nullptr;
  const Synth10dResult* fast = nullptr;
  for (const auto& r : runs) {
    (r.config.method == ExplainerMethod::kInstaShap ? insta : fast) = &r;
  }
  if (insta && fast && !insta->model_shap_mse.values.empty() &&
      !fast->model_shap_mse.values.empty()) {
    report["instashap_final_le_fastshap_final"] =
        insta->model_shap_mse.values.back() <= fast->model_shap_mse.values.back();
  }
  WriteJson(Join(out, "report.json"), report);
}

// ---------------------------------------------------------------------------
// tabular

TabularConfig::TabularConfig() {
  gam.optimizer = OptimizerKind::kConjugateGradient;
  gam.epochs = 200;
  gam.masks_per_point = 4;
  gam.validation_fraction = 0.0;
}

void TabularConfig::Validate() const {
  if (data_path.empty()) throw InvalidArgument("--data is required");
  if (target.empty()) throw InvalidArgument("--target is required");
  if (max_rows < 0) throw InvalidArgument("max rows must be non-negative");
  if (max_order < 1 || max_order > kMaxShapeOrder) {
    throw InvalidArgument("max order must lie in [1, " + std::to_string(kMaxShapeOrder) + "]");
  }
  if (tuples < 1) throw InvalidArgument("tuples must be at least 1");
  if (!(margin >= 0.0)) throw InvalidArgument("margin must be non-negative");
  gam.Validate();
}

json TabularConfig::ToJson() const {
  return {{"data", data_path},
          {"target", target},
          {"task", task == Task::kClassification ? "clf" : "reg"},
          {"categorical", categorical},
          {"drop", drop},
          {"max_rows", max_rows},
          {"train_fraction", train_fraction},
          {"max_order", max_order},
          {"tuples", tuples},
          {"surrogate",
           {{"hidden", surrogate.hidden},
            {"epochs", surrogate.epochs},
            {"batch_size", surrogate.batch_size},
            {"learning_rate", surrogate.learning_rate},
            {"validation_fraction", surrogate.validation_fraction},
            {"patience", surrogate.patience}}},
          {"gam",
           {{"optimizer", instashap::ToString(gam.optimizer)},
            {"epochs", gam.epochs},
            {"batch_size", gam.batch_size},
            {"learning_rate", gam.learning_rate},
            {"masks_per_point", gam.masks_per_point},
            {"ridge", gam.ridge},
            {"smoothness", gam.smoothness},
            {"validation_fraction", gam.validation_fraction}}},
          {"explain_points", explain_points},
          {"margin", margin},
          {"seed", seed}};
}

namespace {

double Score(const RowMatrix& pred, const Dataset& data) {
  return data.task == Task::kClassification ? Accuracy(pred, data.y) : Nmse(pred, data.y);
}

}  // namespace

TabularResult RunTabular(const TabularConfig& config) {
  config.Validate();
  TabularResult r;
  r.config = config;
  CsvOptions opts;
  opts.target = config.target;
  opts.task = config.task;
  opts.categorical = config.categorical;
  opts.drop = config.drop;
  Dataset data = LoadCsvDataset(config.data_path, opts);
  if (config.task == Task::kClassification && data.class_names.size() < 2) {
    throw InvalidArgument("classification target has a single class");
  }
  if (config.max_rows > 0 && data.num_rows() > config.max_rows) {
    std::vector<int> rows(static_cast<std::size_t>(data.num_rows()));
    std::iota(rows.begin(), rows.end(), 0);
    std::mt19937_64 rng(config.seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(config.max_rows));
    std::sort(rows.begin(), rows.end());
    data = data.Subset(rows);
  }
  if (data.num_rows() < 2) throw InvalidArgument("need at least 2 data rows");
  auto split = TrainTestSplit(data, config.train_fraction, config.seed);
  r.train = std::move(split.train);
  r.test = std::move(split.test);
  if (r.train.num_rows() < 200) {
    r.warnings.push_back("only " + std::to_string(r.train.num_rows()) +
                         " training rows; scores and shapes are unreliable");
  }
  const int d = r.train.num_features();

  SurrogateConfig sc = config.surrogate;
  sc.seed = config.seed + 1;
  r.surrogate = TrainSurrogate(r.train, ShapUniformWeights(d), sc);
  r.reference = TrainSurrogate(r.train, FullMaskWeights(d), sc);

  const bool clf = config.task == Task::kClassification;
  const std::string metric = clf ? "accuracy" : "nmse";
  const double reference_score = Score(r.reference.PredictFull(r.test.x), r.test);
  r.surrogate_score = Score(r.surrogate.PredictFull(r.test.x), r.test);

  TrainConfig tc = config.gam;
  tc.seed = config.seed + 2;
  auto finish = [&](AdditiveModel& m) {
    m.features = r.train.features;
    m.task = r.train.task;
    m.class_names = r.train.class_names;
    m.metadata["dataset"] = fs::path(config.data_path).filename().string();
    m.metadata["target"] = config.target;
  };
  auto g1 = TrainGam(r.surrogate, r.train.x, OrderFrontier(d, 1), TrainingObjective::kInstaShap,
                     tc, &r.train.features);
  r.gam1 = std::move(g1.model);
  finish(r.gam1);
  r.gam1_loss = LossSeries("gam1_train_loss", g1.train_loss);

  FrontierSelectionConfig sel;
  sel.max_order = config.max_order;
  sel.rounds = std::max(1, config.max_order - 1);
  sel.per_round = config.tuples;
  sel.seed = config.seed + 3;
  if (config.max_order > 1) {
    r.selection = SelectFrontier(r.surrogate, r.train.x, sel);
  } else {
    r.selection.frontier = OrderFrontier(d, 1);
  }
  auto gk = TrainGam(r.surrogate, r.train.x, r.selection.frontier,
                     TrainingObjective::kInstaShap, tc, &r.train.features);
  r.gamk = std::move(gk.model);
  finish(r.gamk);
  r.gamk_loss = LossSeries("gamk_train_loss", gk.train_loss);

  int order = 1;
  for (FeatureSet t : r.gamk.frontier()) order = std::max(order, t.size());
  const std::string gamk_name = "gam" + std::to_string(order);
  r.report = TrustGap(reference_score,
                      {{"gam1", Score(r.gam1.PredictBatch(r.test.x), r.test)},
                       {gamk_name, Score(r.gamk.PredictBatch(r.test.x), r.test)}},
                      metric, clf, config.margin);
  r.report.warnings = r.warnings;

  const int m = std::min<int>(config.explain_points, r.test.num_rows());
  for (int i = 0; i < m; ++i) r.attributions.push_back(InstantShap(r.gamk, Row(r.test.x, i)));
  return r;
}

json TabularResult::Summary() const {
  json frontier = json::array();
  for (FeatureSet t : gamk.frontier()) {
    if (t.size() < 2) continue;
    json names = json::array();
    for (int i : t.indices()) names.push_back(train.features[i].name);
    frontier.push_back(names);
  }
  return {{"command", "tabular"},
          {"task", config.task == Task::kClassification ? "clf" : "reg"},
          {"train_rows", train.num_rows()},
          {"test_rows", test.num_rows()},
          {"features", train.num_features()},
          {"trust_gap", ToJson(report)},
          {"masked_surrogate_score", Finite(surrogate_score)},
          {"interaction_tuples", std::move(frontier)},
          {"gam1_params", gam1.num_params()},
          {"gamk_params", gamk.num_params()},
          {"warnings", warnings}};
}

void WriteTabularArtifacts(const TabularResult& r, const std::string& out) {
  PrepareOutputDir(out);
  WriteJson(Join(out, "config.json"), {{"command", "tabular"}, {"config", r.config.ToJson()}});
  r.gam1_loss.WriteCsv(Join(out, "metrics/gam1_train_loss.csv"));
  r.gamk_loss.WriteCsv(Join(out, "metrics/gamk_train_loss.csv"));
  auto curve = [&](const std::string& name, const std::vector<double>& v) {
    if (!v.empty()) LossSeries(name, v).WriteCsv(Join(out, "metrics/" + name + ".csv"));
  };
  curve("surrogate_train_loss", r.surrogate.train_loss());
  curve("surrogate_validation_loss", r.surrogate.validation_loss());
  curve("reference_train_loss", r.reference.train_loss());
  curve("reference_validation_loss", r.reference.validation_loss());
  for (const auto& s : r.gam1.shapes()) {
    WriteShapeCsv(r.gam1, s, Join(out, "shapes/" + ShapeFileName("gam1", s.subset(), r.gam1.features)));
  }
  for (const auto& s : r.gamk.shapes()) {
    WriteShapeCsv(r.gamk, s, Join(out, "shapes/" + ShapeFileName("gamk", s.subset(), r.gamk.features)));
  }
  std::vector<std::string> names;
  for (const auto& f : r.train.features) names.push_back(f.name);
  json attr = json::array();
  for (const auto& a : r.attributions) attr.push_back(ToJson(a, names));
  WriteJson(Join(out, "attributions/instant_shap.json"), attr);
  WriteFileBytes(Join(out, "models/gam1.json"), SerializeModel(r.gam1));
  WriteFileBytes(Join(out, "models/gamk.json"), SerializeModel(r.gamk));
  WriteFileBytes(Join(out, "models/surrogate.json"), SerializeModel(r.surrogate));
  WriteJson(Join(out, "report.json"), r.Summary());
}

// ---------------------------------------------------------------------------
// explain

ExplainResult RunExplain(const ExplainConfig& config) {
  if (config.k < 1) throw InvalidArgument("-k must be at least 1");
  if (config.family == IndexFamily::kArchipelago) {
    throw InvalidArgument("family must be one of shapley|faith|sii|taylor|nshap");
  }
  const std::string bytes = ReadFileBytes(config.model_path);
  ExplainResult r;
  const ModelKind kind = PeekModelKind(bytes);
  const int k = config.family == IndexFamily::kShapley ? 1 : config.k;

  if (kind == ModelKind::kAdditive) {
    const AdditiveModel model = DeserializeAdditiveModel(bytes);
    for (std::size_t i = 0; i < static_cast<std::size_t>(model.num_features()); ++i) {
      r.feature_names.push_back(i < model.features.size() ? model.features[i].name
                                                          : "x" + std::to_string(i + 1));
    }
    const RowMatrix x = LoadPointsCsv(config.points_path, model.features);
    const GamMaskedFunction game(model);
    const CountingMaskedFunction counted(game);
    if (model.objective() == TrainingObjective::kInstaShap) {
      r.path = "instant";
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        r.attributions.push_back(InstantShap(model, Row(x, i), config.family, k));
      }
    } else {
      r.path = "enumeration";
      r.warnings.push_back(
          "model was not trained with the masked objective; its shapes are not purified, so "
          "attributions are computed by enumerating its masked predictions over all subsets");
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto p = Row(x, i);
        AttributionResult a = config.family == IndexFamily::kShapley
                                  ? ShapleyExact(counted, p)
                                  : MobiusToIndex(PurifyAt(counted, p), config.family, k);
        a.point.assign(p.begin(), p.end());
        r.attributions.push_back(std::move(a));
      }
    }
    r.model_queries = counted.queries();
  } else if (kind == ModelKind::kAmortizedHead) {
    const AmortizedHead head = DeserializeAmortizedHead(bytes);
    const IndexFamily own = head.order() == 1 ? IndexFamily::kShapley : IndexFamily::kFaith;
    if (config.family != own || k != head.order()) {
      throw InvalidArgument("an amortized head of order " + std::to_string(head.order()) +
                            " only produces " + ToString(own) + " values with -k " +
                            std::to_string(head.order()));
    }
    if (config.target_path.empty()) {
      throw InvalidArgument("explaining with an amortized head needs --target-model");
    }
    const SurrogateModel target = DeserializeSurrogate(ReadFileBytes(config.target_path));
    for (const auto& f : head.encoder().features()) r.feature_names.push_back(f.name);
    const RowMatrix x = LoadPointsCsv(config.points_path, head.encoder().features());
    const CountingMaskedFunction counted(target);
    r.path = "amortized";
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      r.attributions.push_back(head.Explain(counted, Row(x, i)));
    }
    r.model_queries = counted.queries();
  } else {
    const SurrogateModel model = DeserializeSurrogate(bytes);
    for (const auto& f : model.encoder().features()) r.feature_names.push_back(f.name);
    const RowMatrix x = LoadPointsCsv(config.points_path, model.encoder().features());
    const CountingMaskedFunction counted(model);
    r.path = "enumeration";
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto p = Row(x, i);
      AttributionResult a = config.family == IndexFamily::kShapley
                                ? ShapleyExact(counted, p)
                                : MobiusToIndex(PurifyAt(counted, p), config.family, k);
      a.point.assign(p.begin(), p.end());
      r.attributions.push_back(std::move(a));
    }
    r.model_queries = counted.queries();
  }
  for (auto& a : r.attributions) a.metadata["path"] = r.path;
  return r;
}

json ExplainResult::Summary() const {
  return {{"command", "explain"},
          {"path", path},
          {"points", attributions.size()},
          {"model_queries", model_queries},
          {"warnings", warnings}};
}

void WriteExplainArtifacts(const ExplainResult& r, const ExplainConfig& config,
                           const std::string& out) {
  PrepareOutputDir(out);
  WriteJson(Join(out, "config.json"),
            {{"command", "explain"},
             {"config",
              {{"model", config.model_path},
               {"points", config.points_path},
               {"family", ToString(config.family)},
               {"k", config.k},
               {"target_model", config.target_path}}}});
  json attr = json::array();
  for (const auto& a : r.attributions) attr.push_back(ToJson(a, r.feature_names));
  const int k = config.family == IndexFamily::kShapley ? 1 : config.k;
  WriteJson(Join(out, "attributions/" + ToString(config.family) + "_k" + std::to_string(k) +
                          ".json"),
            attr);
  WriteJson(Join(out, "report.json"), r.Summary());
}

}  // namespace instashap
