#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "instashap/anova.hpp"
#include "instashap/dataset.hpp"
#include "instashap/indices.hpp"
#include "instashap/types.hpp"

namespace instashap {

struct ShapMseResult {
  double mse = 0.0;
  // mse divided by the variance of the oracle entries (0 when that variance is 0).
  double normalized = 0.0;
  double oracle_variance = 0.0;
};

// Mean squared difference over every entry of aligned matrices
// (rows = points, columns = feature x output). Throws on shape mismatch.
ShapMseResult ShapMse(const RowMatrix& pred, const RowMatrix& oracle);
// Same over the singleton attributions of aligned results.
ShapMseResult ShapMse(const std::vector<AttributionResult>& pred,
                      const std::vector<AttributionResult>& oracle);
// Rows of singleton attributions, feature-major: column i * c + o.
RowMatrix SingletonMatrix(const std::vector<AttributionResult>& results);

// MSE / Var[labels], pooled over columns. Throws when the labels are constant.
double Nmse(const RowMatrix& pred, const RowMatrix& labels);
// Argmax of each row of `scores` against class indices in `labels`.
double Accuracy(const RowMatrix& scores, const RowMatrix& labels);

enum class Verdict {
  // Some GAM comes within the margin of the blackbox: its explanation is
  // faithful and can be trusted.
  kScenarioA,
  // Every GAM falls short: the blackbox relies on interactions the frontiers
  // cannot express.
  kScenarioB,
};
std::string ToString(Verdict v);

struct TrustGapReport {
  std::string metric;
  bool higher_is_better = false;
  double margin = 0.1;
  double blackbox = 0.0;
  // Candidates in input order; the first is taken as GAM-1 when named so.
  std::vector<std::pair<std::string, double>> gams;
  std::string best_gam;
  double best_score = 0.0;
  // Signed shortfall of each GAM behind the blackbox (positive = worse).
  std::map<std::string, double> gap;
  double best_gap = 0.0;
  double relative_best_gap = 0.0;
  Verdict verdict = Verdict::kScenarioB;
  std::vector<std::string> warnings;
};

// Scenario A iff the best GAM's shortfall is at most margin * |blackbox|.
TrustGapReport TrustGap(double blackbox, std::vector<std::pair<std::string, double>> gams,
                        const std::string& metric, bool higher_is_better,
                        double margin = 0.1);

// Per-feature Shapley values at a point, for one output.
using ShapleyFunction = std::function<std::vector<double>(std::span<const double>)>;
ShapleyFunction ExactShapleyFunction(const MaskedFunction& f, int output = 0);

// x -> Σ_i Φ_i(x* with coordinate i replaced by x_i).
class TraceCompletion {
 public:
  TraceCompletion(ShapleyFunction phi, std::vector<double> anchor);
  double operator()(std::span<const double> x) const;
  const std::vector<double>& anchor() const { return anchor_; }

 private:
  ShapleyFunction phi_;
  std::vector<double> anchor_;
};

struct MetricSeries {
  std::string name;
  std::string x_label = "epoch";
  std::vector<double> x;
  std::vector<double> values;
  // Empty, or one standard error per value.
  std::vector<double> se;

  void Add(double at, double value, double err = -1.0);
  // Throws unless x is strictly increasing and the columns line up.
  void Validate() const;
  void WriteCsv(const std::string& path) const;
  bool Decreased() const { return values.size() >= 2 && values.back() < values.front(); }
};

nlohmann::json ToJson(const AttributionResult& r,
                      const std::vector<std::string>& feature_names = {});
nlohmann::json ToJson(const SobolReport& r);
nlohmann::json ToJson(const TrustGapReport& r);
nlohmann::json ToJson(const MetricSeries& s);

// Pretty-printed with a trailing newline.
void WriteJson(const std::string& path, const nlohmann::json& j);

}  // namespace instashap
