// Command-line front end: synth2d, synth10d, tabular, explain.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "instashap/experiments.hpp"
#include "instashap/parallel.hpp"
#include "instashap/serialize.hpp"

namespace {

using nlohmann::json;
using namespace instashap;

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kBadInput = 3, kBadModel = 4, kNumerical = 5 };

int Fail(int code, const std::string& type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}}.dump()
            << std::endl;
  return code;
}

void Warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::set<std::string> SplitList(const std::vector<std::string>& items) {
  std::set<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.insert(part);
    }
  }
  return out;
}

struct Options {
  std::string out;

  Synth2dConfig s2;

  Synth10dConfig s10;
  std::string method = "both";
  std::string dist = "normal";
  std::string target = "oracle";
  std::string gam_optimizer = "adam";

  TabularConfig tab;
  std::string task = "reg";
  std::vector<std::string> categorical;
  std::vector<std::string> drop;
  int gam_epochs = -1;
  std::string tab_optimizer;

  ExplainConfig ex;
  std::string family = "shapley";
};

void AddSynth2d(CLI::App& app, Options& o) {
  auto* c = app.add_subcommand("synth2d", "Two-feature world f = x + xy: purification, Shapley "
                                          "oracles, Sobol report and InstaSHAP training");
  c->add_option("--rho", o.s2.rho, "Pair correlation in [-1, 1]")->capture_default_str();
  c->add_option("--grid", o.s2.grid, "Grid points per axis")->capture_default_str();
  c->add_option("--grid-range", o.s2.grid_range, "Grid covers [-r, r]^2")->capture_default_str();
  c->add_option("--train-points", o.s2.train_points)->capture_default_str();
  c->add_option("--iterations", o.s2.iterations, "Solver iterations")->capture_default_str();
  c->add_option("--masks", o.s2.masks_per_point, "Masks per training point")
      ->capture_default_str();
  c->add_option("--smoothness", o.s2.smoothness)->capture_default_str();
  c->add_option("--probe-points", o.s2.probe_points)->capture_default_str();
  c->add_option("--sobol-samples", o.s2.sobol_samples)->capture_default_str();
  c->add_option("--seed", o.s2.seed)->capture_default_str();
  c->add_option("--out", o.out, "Output directory")->required();
}

void AddSynth10d(CLI::App& app, Options& o) {
  auto* c = app.add_subcommand("synth10d", "Multilinear benchmark: per-epoch SHAP error curves "
                                           "of FastSHAP and InstaSHAP");
  c->add_option("--d", o.s10.d, "Feature count (even)")->capture_default_str();
  c->add_option("--rho", o.s10.rho)->capture_default_str();
  c->add_option("--kstar", o.s10.kstar, "Target interaction order")->capture_default_str();
  c->add_option("--dist", o.dist, "Coefficient distribution")
      ->check(CLI::IsMember({"normal", "laplace"}))
      ->capture_default_str();
  c->add_option("--method", o.method)
      ->check(CLI::IsMember({"fastshap", "instashap", "both"}))
      ->capture_default_str();
  c->add_option("--target", o.target, "Explained model: exact oracle or trained surrogate")
      ->check(CLI::IsMember({"oracle", "surrogate"}))
      ->capture_default_str();
  c->add_option("--epochs", o.s10.epochs)->capture_default_str();
  c->add_option("--train-points", o.s10.train_points)->capture_default_str();
  c->add_option("--eval-points", o.s10.eval_points)->capture_default_str();
  c->add_option("--batch-size", o.s10.batch_size)->capture_default_str();
  c->add_option("--masks", o.s10.masks_per_point)->capture_default_str();
  c->add_option("--gam-lr", o.s10.gam_learning_rate)->capture_default_str();
  c->add_option("--head-lr", o.s10.head_learning_rate)->capture_default_str();
  c->add_option("--lr-decay", o.s10.lr_decay)->capture_default_str();
  c->add_option("--gam-optimizer", o.gam_optimizer)
      ->check(CLI::IsMember({"adam", "sgd", "cg"}))
      ->capture_default_str();
  c->add_option("--knots", o.s10.basis.knots_by_order, "Knots per axis for orders 1..4")
      ->expected(4)
      ->capture_default_str();
  c->add_option("--hidden", o.s10.head_hidden, "FastSHAP hidden widths")->capture_default_str();
  c->add_option("--surrogate-epochs", o.s10.surrogate_epochs)->capture_default_str();
  c->add_option("--seed", o.s10.seed)->capture_default_str();
  c->add_option("--out", o.out, "Output directory")->required();
}

void AddTabular(CLI::App& app, Options& o) {
  auto* c = app.add_subcommand("tabular", "CSV workflow: surrogate, frontier selection, GAM-1 "
                                          "and GAM-k, reference model, trust-gap report");
  c->add_option("--data", o.tab.data_path, "CSV with header row")->required();
  c->add_option("--target", o.tab.target, "Target column")->required();
  c->add_option("--task", o.task)->check(CLI::IsMember({"reg", "clf"}))->capture_default_str();
  c->add_option("--categorical", o.categorical, "Columns to treat as categorical (comma list)");
  c->add_option("--drop", o.drop, "Columns to ignore (comma list)");
  c->add_option("--max-order", o.tab.max_order, "Largest interaction order")
      ->capture_default_str();
  c->add_option("--tuples", o.tab.tuples, "Interaction tuples accepted per order")
      ->capture_default_str();
  c->add_option("--max-rows", o.tab.max_rows, "Seeded row subsample (0 = all)")
      ->capture_default_str();
  c->add_option("--train-fraction", o.tab.train_fraction)->capture_default_str();
  c->add_option("--surrogate-epochs", o.tab.surrogate.epochs)->capture_default_str();
  c->add_option("--surrogate-hidden", o.tab.surrogate.hidden)->capture_default_str();
  c->add_option("--gam-epochs", o.gam_epochs, "GAM epochs or solver iterations");
  c->add_option("--gam-optimizer", o.tab_optimizer)->check(CLI::IsMember({"adam", "sgd", "cg"}));
  c->add_option("--masks", o.tab.gam.masks_per_point)->capture_default_str();
  c->add_option("--margin", o.tab.margin, "Relative trust-gap margin")->capture_default_str();
  c->add_option("--explain-points", o.tab.explain_points)->capture_default_str();
  c->add_option("--seed", o.tab.seed)->capture_default_str();
  c->add_option("--out", o.out, "Output directory")->required();
}

void AddExplain(CLI::App& app, Options& o) {
  auto* c = app.add_subcommand("explain", "Attributions for points from a stored model");
  c->add_option("--model", o.ex.model_path, "Model file")->required();
  c->add_option("--points", o.ex.points_path, "CSV of points with feature columns")->required();
  c->add_option("--family", o.family)
      ->check(CLI::IsMember({"shapley", "faith", "sii", "taylor", "nshap"}))
      ->capture_default_str();
  c->add_option("-k", o.ex.k, "Interaction order")->capture_default_str();
  c->add_option("--target-model", o.ex.target_path, "Surrogate explained by an amortized head");
  c->add_option("--out", o.out, "Output directory")->required();
}

void Print(const json& report) { std::cout << report.dump(2) << std::endl; }

int RunCommand(CLI::App& app, Options& o) {
  if (app.got_subcommand("synth2d")) {
    const auto r = RunSynth2d(o.s2);
    WriteSynth2dArtifacts(r, o.out);
    Warn(r.warnings);
    Print(r.Summary());
  } else if (app.got_subcommand("synth10d")) {
    o.s10.dist = ParseCoefficientDistribution(o.dist);
    o.s10.target = ParseBenchmarkTarget(o.target);
    o.s10.gam_optimizer = ParseOptimizerKind(o.gam_optimizer);
    std::vector<ExplainerMethod> methods;
    if (o.method == "both") {
      methods = {ExplainerMethod::kFastShap, ExplainerMethod::kInstaShap};
    } else {
      methods = {ParseExplainerMethod(o.method)};
    }
    std::vector<Synth10dResult> runs;
    for (auto m : methods) {
      Synth10dConfig c = o.s10;
      c.method = m;
      runs.push_back(RunSynth10d(c));
    }
    WriteSynth10dArtifacts(runs, o.out);
    json summary = json::array();
    for (const auto& r : runs) summary.push_back(r.Summary());
    Print(summary);
  } else if (app.got_subcommand("tabular")) {
    o.tab.task = o.task == "clf" ? Task::kClassification : Task::kRegression;
    o.tab.categorical = SplitList(o.categorical);
    o.tab.drop = SplitList(o.drop);
    if (!o.tab_optimizer.empty()) o.tab.gam.optimizer = ParseOptimizerKind(o.tab_optimizer);
    if (o.gam_epochs >= 0) o.tab.gam.epochs = o.gam_epochs;
    const auto r = RunTabular(o.tab);
    WriteTabularArtifacts(r, o.out);
    Warn(r.warnings);
    Print(r.Summary());
  } else if (app.got_subcommand("explain")) {
    o.ex.family = ParseIndexFamily(o.family);
    const auto r = RunExplain(o.ex);
    WriteExplainArtifacts(r, o.ex, o.out);
    Warn(r.warnings);
    Print(r.Summary());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InstaSHAP: masked additive models with instant Shapley values"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values");
  app.add_option_function<int>(
      "--threads", [](int n) { SetNumThreads(n); },
      "Worker threads (default: INSTASHAP_NUM_THREADS or all cores)");
  Options o;
  AddSynth2d(app, o);
  AddSynth10d(app, o);
  AddTabular(app, o);
  AddExplain(app, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(kUsage, "usage", e.what());
  }

  try {
    return RunCommand(app, o);
  } catch (const CorruptModelError& e) {
    return Fail(kBadModel, "corrupt_model", e.what());
  } catch (const ModelVersionError& e) {
    return Fail(kBadModel, "model_version", e.what());
  } catch (const InvalidArgument& e) {
    return Fail(kBadInput, "invalid_argument", e.what());
  } catch (const NumericalError& e) {
    return Fail(kNumerical, "numerical", e.what());
  } catch (const std::exception& e) {
    return Fail(kInternal, "internal", e.what());
  }
}
