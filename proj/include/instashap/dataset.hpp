#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "instashap/types.hpp"

namespace instashap {

enum class FeatureKind { kContinuous, kCategorical };
enum class Task { kRegression, kClassification };

struct FeatureInfo {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  // Category labels; the stored value of a categorical cell is its index here.
  std::vector<std::string> levels;

  int num_levels() const { return static_cast<int>(levels.size()); }
};

// Tabular data with numeric storage. Categorical cells hold level indices,
// classification labels hold class indices in a single column.
struct Dataset {
  std::vector<FeatureInfo> features;
  RowMatrix x;
  RowMatrix y;
  Task task = Task::kRegression;
  std::string target_name = "y";
  std::vector<std::string> class_names;

  int num_rows() const { return static_cast<int>(x.rows()); }
  int num_features() const { return static_cast<int>(x.cols()); }
  // Width of model outputs: 1 for scalar regression, #classes otherwise.
  int output_dim() const {
    return task == Task::kClassification ? static_cast<int>(class_names.size())
                                         : static_cast<int>(y.cols());
  }

  Dataset Subset(const std::vector<int>& rows) const;
};

// All-continuous regression dataset from matrices.
Dataset MakeRegressionDataset(RowMatrix x, RowMatrix y);

struct CsvOptions {
  std::string target;
  Task task = Task::kRegression;
  // Columns forced categorical; non-numeric columns are categorical anyway.
  std::set<std::string> categorical;
  // Columns to drop before modelling.
  std::set<std::string> drop;
};

// Parses a comma-separated file with a header row. Throws InvalidArgument on
// malformed input (ragged rows, missing target, empty file).
Dataset LoadCsvDataset(const std::string& path, const CsvOptions& options);

struct Split {
  Dataset train;
  Dataset test;
};

// Seeded random split; `train_fraction` of rows go to train.
Split TrainTestSplit(const Dataset& data, double train_fraction, std::uint64_t seed);

// Reads a numeric matrix (header row required). Column names are returned.
RowMatrix ReadNumericCsv(const std::string& path, std::vector<std::string>* header);

// Rows of `features` read by column name (x1..xd for unnamed features); extra
// columns are ignored and categorical cells must hold one of the known labels.
RowMatrix LoadPointsCsv(const std::string& path, const std::vector<FeatureInfo>& features);

}  // namespace instashap
