#include "instashap/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include <boost/tokenizer.hpp>

#include "instashap/feature_set.hpp"

namespace instashap {

namespace {

using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  Tokenizer tok(line);
  for (const auto& t : tok) out.push_back(Trim(t));
  return out;
}

bool ParseDouble(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end;
}

// Sorted level list: numeric order when every label parses, else lexicographic.
std::vector<std::string> SortedLevels(const std::vector<std::string>& cells) {
  std::vector<std::string> levels(cells.begin(), cells.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  bool numeric = true;
  double tmp;
  for (const auto& l : levels) numeric = numeric && ParseDouble(l, &tmp);
  if (numeric) {
    std::sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) {
      double x, y;
      ParseDouble(a, &x);
      ParseDouble(b, &y);
      return x < y;
    });
  }
  return levels;
}

}  // namespace

Dataset Dataset::Subset(const std::vector<int>& rows) const {
  Dataset out;
  out.features = features;
  out.task = task;
  out.target_name = target_name;
  out.class_names = class_names;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    out.y.row(static_cast<Eigen::Index>(i)) = y.row(rows[i]);
  }
  return out;
}

Dataset MakeRegressionDataset(RowMatrix x, RowMatrix y) {
  if (x.rows() != y.rows()) throw InvalidArgument("x/y row count mismatch");
  Dataset out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.features.push_back({"x" + std::to_string(j + 1), FeatureKind::kContinuous, {}});
  }
  out.x = std::move(x);
  out.y = std::move(y);
  out.task = Task::kRegression;
  return out;
}

Dataset LoadCsvDataset(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("'" + path + "' is empty");
  const std::vector<std::string> header = SplitCsvLine(line);
  std::vector<std::vector<std::string>> cells;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    auto row = SplitCsvLine(line);
    if (row.size() != header.size()) {
      throw InvalidArgument("malformed CSV: line " + std::to_string(line_no) +
                            " has " + std::to_string(row.size()) +
                            " fields, header has " + std::to_string(header.size()));
    }
    cells.push_back(std::move(row));
  }
  if (cells.empty()) throw InvalidArgument("'" + path + "' has no data rows");

  const auto target_it = std::find(header.begin(), header.end(), options.target);
  if (target_it == header.end()) {
    throw InvalidArgument("target column '" + options.target + "' not found");
  }
  const int target_col = static_cast<int>(target_it - header.begin());

  Dataset data;
  data.task = options.task;
  data.target_name = options.target;
  std::vector<int> feature_cols;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    if (j == target_col || options.drop.count(header[j])) continue;
    feature_cols.push_back(j);
  }
  const auto n = static_cast<Eigen::Index>(cells.size());
  data.x.resize(n, static_cast<Eigen::Index>(feature_cols.size()));

  for (std::size_t f = 0; f < feature_cols.size(); ++f) {
    const int j = feature_cols[f];
    FeatureInfo info;
    info.name = header[j];
    std::vector<std::string> column(cells.size());
    bool numeric = true;
    double v;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      column[i] = cells[i][j];
      numeric = numeric && ParseDouble(column[i], &v);
    }
    if (!numeric || options.categorical.count(info.name)) {
      info.kind = FeatureKind::kCategorical;
      info.levels = SortedLevels(column);
      std::map<std::string, int> index;
      for (int l = 0; l < info.num_levels(); ++l) index[info.levels[l]] = l;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
            index[column[i]];
      }
    } else {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        ParseDouble(column[i], &v);
        data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = v;
      }
    }
    data.features.push_back(std::move(info));
  }

  data.y.resize(n, 1);
  std::vector<std::string> target(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) target[i] = cells[i][target_col];
  if (options.task == Task::kClassification) {
    data.class_names = SortedLevels(target);
    std::map<std::string, int> index;
    for (int l = 0; l < static_cast<int>(data.class_names.size()); ++l) {
      index[data.class_names[l]] = l;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      data.y(static_cast<Eigen::Index>(i), 0) = index[target[i]];
    }
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v;
      if (!ParseDouble(target[i], &v)) {
        throw InvalidArgument("non-numeric regression target '" + target[i] +
                              "' at data row " + std::to_string(i + 1));
      }
      data.y(static_cast<Eigen::Index>(i), 0) = v;
    }
  }
  return data;
}

Split TrainTestSplit(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  std::vector<int> order(data.num_rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = std::max(
      1, std::min(data.num_rows() - 1,
                  static_cast<int>(std::lround(train_fraction * data.num_rows()))));
  std::vector<int> train(order.begin(), order.begin() + n_train);
  std::vector<int> test(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {data.Subset(train), data.Subset(test)};
}

RowMatrix ReadNumericCsv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("'" + path + "' is empty");
  const auto names = SplitCsvLine(line);
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != names.size()) {
      throw InvalidArgument("malformed CSV: line " + std::to_string(line_no) +
                            " has wrong field count");
    }
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!ParseDouble(cells[j], &row[j])) {
        throw InvalidArgument("non-numeric cell '" + cells[j] + "' at line " +
                              std::to_string(line_no));
      }
    }
    rows.push_back(std::move(row));
  }
  RowMatrix m(static_cast<Eigen::Index>(rows.size()),
              static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  if (header) *header = names;
  return m;
}

RowMatrix LoadPointsCsv(const std::string& path, const std::vector<FeatureInfo>& features) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("'" + path + "' is empty");
  const auto header = SplitCsvLine(line);
  std::vector<int> column(features.size());
  for (std::size_t f = 0; f < features.size(); ++f) {
    const std::string name =
        features[f].name.empty() ? "x" + std::to_string(f + 1) : features[f].name;
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidArgument("points file lacks column '" + name + "'");
    column[f] = static_cast<int>(it - header.begin());
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      throw InvalidArgument("malformed CSV: line " + std::to_string(line_no) +
                            " has wrong field count");
    }
    std::vector<double> row(features.size());
    for (std::size_t f = 0; f < features.size(); ++f) {
      const std::string& cell = cells[column[f]];
      const auto& info = features[f];
      if (info.kind == FeatureKind::kCategorical) {
        const auto lv = std::find(info.levels.begin(), info.levels.end(), cell);
        if (lv == info.levels.end()) {
          throw InvalidArgument("unknown level '" + cell + "' of '" + info.name + "' at line " +
                                std::to_string(line_no));
        }
        row[f] = static_cast<double>(lv - info.levels.begin());
      } else if (!ParseDouble(cell, &row[f])) {
        throw InvalidArgument("non-numeric cell '" + cell + "' at line " +
                              std::to_string(line_no));
      }
    }
    rows.push_back(std::move(row));
  }
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t f = 0; f < features.size(); ++f) m(i, f) = rows[i][f];
  return m;
}

}  // namespace instashap
