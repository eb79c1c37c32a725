#include "instashap/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace instashap {

using nlohmann::json;

ShapMseResult ShapMse(const RowMatrix& pred, const RowMatrix& oracle) {
  if (pred.rows() != oracle.rows() || pred.cols() != oracle.cols()) {
    throw InvalidArgument("shap_mse: prediction is " + std::to_string(pred.rows()) + "x" +
                          std::to_string(pred.cols()) + " but oracle is " +
                          std::to_string(oracle.rows()) + "x" + std::to_string(oracle.cols()));
  }
  if (oracle.size() == 0) throw InvalidArgument("shap_mse: no entries");
  ShapMseResult r;
  r.mse = (pred - oracle).squaredNorm() / static_cast<double>(oracle.size());
  const double mean = oracle.mean();
  r.oracle_variance = (oracle.array() - mean).square().mean();
  r.normalized = r.oracle_variance > 0 ? r.mse / r.oracle_variance : 0.0;
  return r;
}

RowMatrix SingletonMatrix(const std::vector<AttributionResult>& results) {
  if (results.empty()) return RowMatrix(0, 0);
  const int d = results[0].d;
  const int c = results[0].c;
  RowMatrix m(static_cast<Eigen::Index>(results.size()), d * c);
  for (std::size_t p = 0; p < results.size(); ++p) {
    if (results[p].d != d || results[p].c != c) {
      throw InvalidArgument("attribution results disagree on feature or output count");
    }
    for (int i = 0; i < d; ++i)
      for (int o = 0; o < c; ++o) m(p, i * c + o) = results[p].value(FeatureSet::Singleton(i), o);
  }
  return m;
}

ShapMseResult ShapMse(const std::vector<AttributionResult>& pred,
                      const std::vector<AttributionResult>& oracle) {
  if (pred.size() != oracle.size()) {
    throw InvalidArgument("shap_mse: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(oracle.size()) + " oracle points");
  }
  return ShapMse(SingletonMatrix(pred), SingletonMatrix(oracle));
}

double Nmse(const RowMatrix& pred, const RowMatrix& labels) {
  if (pred.rows() != labels.rows() || pred.cols() != labels.cols() || labels.size() == 0) {
    throw InvalidArgument("nmse: predictions and labels are not aligned");
  }
  double var = 0.0;
  for (Eigen::Index j = 0; j < labels.cols(); ++j) {
    const double mean = labels.col(j).mean();
    var += (labels.col(j).array() - mean).square().sum();
  }
  if (!(var > 0.0)) throw InvalidArgument("nmse: labels have zero variance");
  return (pred - labels).squaredNorm() / var;
}

double Accuracy(const RowMatrix& scores, const RowMatrix& labels) {
  if (scores.rows() != labels.rows() || labels.cols() != 1 || scores.rows() == 0) {
    throw InvalidArgument("accuracy: scores and labels are not aligned");
  }
  long hits = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    hits += static_cast<double>(best) == labels(i, 0);
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows());
}

std::string ToString(Verdict v) {
  return v == Verdict::kScenarioA ? "scenario-A" : "scenario-B";
}

TrustGapReport TrustGap(double blackbox, std::vector<std::pair<std::string, double>> gams,
                        const std::string& metric, bool higher_is_better, double margin) {
  if (gams.empty()) throw InvalidArgument("trust_gap: no GAM scores");
  if (!(margin >= 0.0)) throw InvalidArgument("trust_gap: margin must be non-negative");
  TrustGapReport r;
  r.metric = metric;
  r.higher_is_better = higher_is_better;
  r.margin = margin;
  r.blackbox = blackbox;
  r.gams = std::move(gams);
  r.best_gap = std::numeric_limits<double>::infinity();
  for (const auto& [name, score] : r.gams) {
    const double shortfall = higher_is_better ? blackbox - score : score - blackbox;
    r.gap[name] = shortfall;
    if (shortfall < r.best_gap) {
      r.best_gap = shortfall;
      r.best_gam = name;
      r.best_score = score;
    }
  }
  const double scale = std::abs(blackbox);
  r.relative_best_gap = scale > 0 ? r.best_gap / scale : (r.best_gap > 0 ? INFINITY : 0.0);
  r.verdict = r.best_gap <= margin * scale ? Verdict::kScenarioA : Verdict::kScenarioB;
  return r;
}

ShapleyFunction ExactShapleyFunction(const MaskedFunction& f, int output) {
  return [&f, output](std::span<const double> x) {
    return ShapleyExact(f, x).PerFeature(output);
  };
}

TraceCompletion::TraceCompletion(ShapleyFunction phi, std::vector<double> anchor)
    : phi_(std::move(phi)), anchor_(std::move(anchor)) {
  if (!phi_) throw InvalidArgument("trace completion needs a Shapley function");
}

double TraceCompletion::operator()(std::span<const double> x) const {
  if (x.size() != anchor_.size()) throw InvalidArgument("point and anchor differ in length");
  std::vector<double> probe = anchor_;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i];
    const auto phi = phi_(probe);
    if (phi.size() != x.size()) throw InvalidArgument("Shapley function returned wrong length");
    total += phi[i];
    probe[i] = anchor_[i];
  }
  return total;
}

void MetricSeries::Add(double at, double value, double err) {
  x.push_back(at);
  values.push_back(value);
  if (err >= 0.0) se.push_back(err);
}

void MetricSeries::Validate() const {
  if (x.size() != values.size() || (!se.empty() && se.size() != values.size())) {
    throw InvalidArgument("metric series '" + name + "' has ragged columns");
  }
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) {
      throw InvalidArgument("metric series '" + name + "' x-axis is not increasing");
    }
  }
}

void MetricSeries::WriteCsv(const std::string& path) const {
  Validate();
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << std::setprecision(17) << x_label << ",value,se\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    out << x[i] << "," << values[i] << ",";
    if (!se.empty()) out << se[i];
    out << "\n";
  }
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

namespace {

std::string SubsetKey(FeatureSet s, const std::vector<std::string>& names) {
  if (s.empty()) return "{}";
  std::string key;
  for (int i : s.indices()) {
    if (!key.empty()) key += "|";
    key += i < static_cast<int>(names.size()) ? names[i] : "x" + std::to_string(i + 1);
  }
  return key;
}

// Non-finite doubles become null, which nlohmann does anyway; keep it explicit.
json Num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json Nums(const std::vector<double>& v) {
  json a = json::array();
  for (double e : v) a.push_back(Num(e));
  return a;
}

}  // namespace

json ToJson(const AttributionResult& r, const std::vector<std::string>& feature_names) {
  json values = json::array();
  for (const auto& [bits, v] : r.values) {
    json e = {{"subset", SubsetKey(FeatureSet(bits), feature_names)},
              {"bitmask", bits},
              {"value", Nums(v)}};
    const auto se = r.standard_errors.find(bits);
    if (se != r.standard_errors.end()) e["se"] = Nums(se->second);
    values.push_back(std::move(e));
  }
  json j = {{"family", ToString(r.family)},
            {"k", r.k},
            {"d", r.d},
            {"c", r.c},
            {"point", Nums(r.point)},
            {"base_value", Nums(r.base_value)},
            {"attributions", std::move(values)},
            {"metadata", r.metadata}};
  if (!r.efficiency_residual.empty()) j["efficiency_residual"] = Nums(r.efficiency_residual);
  return j;
}

json ToJson(const SobolReport& r) {
  json subsets = json::array();
  for (std::size_t m = 0; m < r.variance.size(); ++m) {
    json e = {{"subset", SubsetKey(FeatureSet(static_cast<std::uint32_t>(m)), {})},
              {"bitmask", m},
              {"V", Num(r.variance[m])},
              {"C", Num(r.covariance[m])}};
    if (m < r.variance_se.size()) e["V_se"] = Num(r.variance_se[m]);
    if (m < r.covariance_se.size()) e["C_se"] = Num(r.covariance_se[m]);
    if (m < r.uncentered.size()) e["C_uncentered"] = Num(r.uncentered[m]);
    if (m < r.uncentered_se.size()) e["C_uncentered_se"] = Num(r.uncentered_se[m]);
    subsets.push_back(std::move(e));
  }
  return {{"d", r.d},
          {"n", r.n},
          {"total_variance", Num(r.total_variance)},
          {"total_variance_se", Num(r.total_variance_se)},
          {"second_moment", Num(r.second_moment)},
          {"variance_sum_gap", Num(r.variance_sum_gap)},
          {"variance_sum_gap_se", Num(r.variance_sum_gap_se)},
          {"covariance_sum_gap", Num(r.covariance_sum_gap)},
          {"covariance_sum_gap_se", Num(r.covariance_sum_gap_se)},
          {"uncentered_sum_gap", Num(r.uncentered_sum_gap)},
          {"uncentered_sum_gap_se", Num(r.uncentered_sum_gap_se)},
          {"degenerate", r.degenerate},
          {"subsets", std::move(subsets)}};
}

json ToJson(const TrustGapReport& r) {
  json gams = json::array();
  for (const auto& [name, score] : r.gams) {
    gams.push_back({{"name", name}, {"score", Num(score)}, {"gap", Num(r.gap.at(name))}});
  }
  return {{"metric", r.metric},
          {"higher_is_better", r.higher_is_better},
          {"margin", r.margin},
          {"blackbox", Num(r.blackbox)},
          {"gams", std::move(gams)},
          {"best_gam", r.best_gam},
          {"best_score", Num(r.best_score)},
          {"best_gap", Num(r.best_gap)},
          {"relative_best_gap", Num(r.relative_best_gap)},
          {"verdict", ToString(r.verdict)},
          {"warnings", r.warnings}};
}

json ToJson(const MetricSeries& s) {
  return {{"name", s.name}, {"x_label", s.x_label}, {"x", Nums(s.x)},
          {"values", Nums(s.values)}, {"se", Nums(s.se)}};
}

void WriteJson(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

}  // namespace instashap
