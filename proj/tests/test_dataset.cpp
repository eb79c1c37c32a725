#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "instashap/dataset.hpp"
#include "instashap/feature_set.hpp"

namespace instashap {
namespace {

class TempCsv {
 public:
  explicit TempCsv(const std::string& body) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("instashap_dataset_" + std::to_string(counter++) + ".csv");
    std::ofstream(path_) << body;
  }
  ~TempCsv() { std::filesystem::remove(path_); }
  std::string path() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

TEST(LoadCsv, NumericRegression) {
  const TempCsv f("a,b,y\n1,2,3\n4,5,6\n");
  const Dataset d = LoadCsvDataset(f.path(), {.target = "y"});
  EXPECT_EQ(d.num_rows(), 2);
  EXPECT_EQ(d.num_features(), 2);
  EXPECT_EQ(d.features[1].name, "b");
  EXPECT_EQ(d.x(1, 0), 4.0);
  EXPECT_EQ(d.y(1, 0), 6.0);
  EXPECT_EQ(d.output_dim(), 1);
}

TEST(LoadCsv, TextColumnsBecomeCategorical) {
  const TempCsv f("season,temp,count\nwinter,1.5,10\nsummer,20,30\nwinter,2,12\n");
  const Dataset d = LoadCsvDataset(f.path(), {.target = "count"});
  ASSERT_EQ(d.features[0].kind, FeatureKind::kCategorical);
  EXPECT_EQ(d.features[0].num_levels(), 2);
  EXPECT_EQ(d.x(0, 0), d.x(2, 0));
  EXPECT_NE(d.x(0, 0), d.x(1, 0));
  EXPECT_EQ(d.features[1].kind, FeatureKind::kContinuous);
}

TEST(LoadCsv, ForcedCategoricalAndDroppedColumns) {
  const TempCsv f("id,zone,x,y\n1,3,0.5,1\n2,7,0.25,2\n3,3,1,3\n");
  CsvOptions opt;
  opt.target = "y";
  opt.categorical = {"zone"};
  opt.drop = {"id"};
  const Dataset d = LoadCsvDataset(f.path(), opt);
  ASSERT_EQ(d.num_features(), 2);
  EXPECT_EQ(d.features[0].name, "zone");
  EXPECT_EQ(d.features[0].kind, FeatureKind::kCategorical);
}

TEST(LoadCsv, ClassificationLabels) {
  const TempCsv f("x,label\n1,b\n2,a\n3,c\n4,a\n");
  const Dataset d = LoadCsvDataset(f.path(), {.target = "label", .task = Task::kClassification});
  EXPECT_EQ(d.output_dim(), 3);
  EXPECT_EQ(d.class_names[static_cast<int>(d.y(1, 0))], "a");
  EXPECT_EQ(d.y(1, 0), d.y(3, 0));
}

TEST(LoadCsv, MalformedInputsAreRejected) {
  const TempCsv ragged("a,b,y\n1,2,3\n4,5\n");
  EXPECT_THROW(LoadCsvDataset(ragged.path(), {.target = "y"}), InvalidArgument);
  const TempCsv no_target("a,b\n1,2\n");
  EXPECT_THROW(LoadCsvDataset(no_target.path(), {.target = "y"}), InvalidArgument);
  const TempCsv empty("");
  EXPECT_THROW(LoadCsvDataset(empty.path(), {.target = "y"}), InvalidArgument);
  const TempCsv header_only("a,y\n");
  EXPECT_THROW(LoadCsvDataset(header_only.path(), {.target = "y"}), InvalidArgument);
  const TempCsv bad_label("a,y\n1,high\n");
  EXPECT_THROW(LoadCsvDataset(bad_label.path(), {.target = "y"}), InvalidArgument);
  EXPECT_THROW(LoadCsvDataset("/nonexistent/file.csv", {.target = "y"}), InvalidArgument);
}

TEST(ReadNumericCsv, HeaderAndValues) {
  const TempCsv f("x1,x2\n1,2\n3,4.5\n");
  std::vector<std::string> header;
  const RowMatrix m = ReadNumericCsv(f.path(), &header);
  EXPECT_EQ(header, (std::vector<std::string>{"x1", "x2"}));
  EXPECT_EQ(m(1, 1), 4.5);
  const TempCsv bad("x1\nfoo\n");
  EXPECT_THROW(ReadNumericCsv(bad.path(), nullptr), InvalidArgument);
}

TEST(TrainTestSplit, PartitionIsSeededAndComplete) {
  RowMatrix x(100, 1), y(100, 1);
  for (int i = 0; i < 100; ++i) x(i, 0) = y(i, 0) = i;
  const Dataset d = MakeRegressionDataset(x, y);
  const Split a = TrainTestSplit(d, 0.8, 5);
  const Split b = TrainTestSplit(d, 0.8, 5);
  EXPECT_EQ(a.train.num_rows(), 80);
  EXPECT_EQ(a.test.num_rows(), 20);
  EXPECT_TRUE((a.train.x.array() == b.train.x.array()).all());
  std::vector<double> all;
  for (int i = 0; i < 80; ++i) all.push_back(a.train.x(i, 0));
  for (int i = 0; i < 20; ++i) all.push_back(a.test.x(i, 0));
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
  EXPECT_THROW(TrainTestSplit(d, 1.0, 1), InvalidArgument);
}

}  // namespace
}  // namespace instashap
