#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "instashap/serialize.hpp"

namespace instashap {
namespace {

RowMatrix RandomRows(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RowMatrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = g(rng);
  return x;
}

// d=3 with a categorical third feature.
Dataset MixedDataset(int n, Task task, std::uint64_t seed) {
  Dataset data;
  data.features = {{"age", FeatureKind::kContinuous, {}},
                   {"load", FeatureKind::kContinuous, {}},
                   {"site", FeatureKind::kCategorical, {"north", "south", "east"}}};
  data.x = RandomRows(n, 3, seed);
  std::mt19937_64 rng(seed + 1);
  data.y = RowMatrix(n, 1);
  for (int i = 0; i < n; ++i) {
    data.x(i, 2) = static_cast<double>(rng() % 3);
    const double s = data.x(i, 0) - 0.5 * data.x(i, 1) * data.x(i, 2);
    data.y(i, 0) = task == Task::kRegression ? s : (s > 0 ? 1.0 : 0.0);
  }
  data.task = task;
  if (task == Task::kClassification) data.class_names = {"no", "yes"};
  return data;
}

AdditiveModel RandomModel(int c, std::uint64_t seed) {
  const auto data = MixedDataset(200, Task::kRegression, seed);
  auto model = BuildAdditiveModel(
      {FeatureSet::FromIndices({0}), FeatureSet::FromIndices({1}), FeatureSet::FromIndices({2}),
       FeatureSet::FromIndices({0, 2}), FeatureSet::FromIndices({0, 1, 2})},
      data.x, data.features, c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (auto& v : model.intercept()) v = g(rng);
  for (auto& s : model.shapes())
    for (auto& v : s.coefficients()) v = g(rng) / 3.0;
  model.set_objective(TrainingObjective::kInstaShap);
  model.features = data.features;
  model.metadata = {{"dataset", "mixed"}, {"epochs", "12"}};
  return model;
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("instashap_" + name)).string();
}

TEST(Base64Doubles, RoundTripsSpecialValuesBitExactly) {
  const std::vector<double> v = {0.0, -0.0, 1.0 / 3.0, 1e-308, -1e308, 5e-324,
                                 std::numeric_limits<double>::infinity()};
  const auto back = Base64DecodeDoubles(Base64EncodeDoubles(v));
  ASSERT_EQ(back.size(), v.size());
  EXPECT_EQ(std::memcmp(back.data(), v.data(), v.size() * sizeof(double)), 0);
  EXPECT_TRUE(Base64DecodeDoubles(Base64EncodeDoubles({})).empty());
}

TEST(Base64Doubles, LittleEndianLayout) {
  // 1.0 is 0x3FF0000000000000; little-endian bytes 00 00 00 00 00 00 F0 3F.
  EXPECT_EQ(Base64EncodeDoubles({1.0}), "AAAAAAAA8D8=");
}

TEST(Base64Doubles, RejectsGarbage) {
  EXPECT_THROW(Base64DecodeDoubles("not base64!"), CorruptModelError);
  EXPECT_THROW(Base64DecodeDoubles("AAAA"), CorruptModelError);  // 3 bytes
}

TEST(ModelFile, AdditiveRoundTripIsBitIdentical) {
  const auto model = RandomModel(2, 5);
  const std::string path = TempPath("gam.json");
  WriteFileBytes(path, SerializeModel(model));
  const std::string bytes = ReadFileBytes(path);
  EXPECT_EQ(PeekModelKind(bytes), ModelKind::kAdditive);
  const auto back = DeserializeAdditiveModel(bytes);
  std::remove(path.c_str());

  EXPECT_EQ(back.num_features(), 3);
  EXPECT_EQ(back.output_dim(), 2);
  EXPECT_EQ(back.objective(), TrainingObjective::kInstaShap);
  EXPECT_EQ(back.frontier(), model.frontier());
  EXPECT_EQ(back.metadata.at("epochs"), "12");
  EXPECT_EQ(back.features[2].levels[1], "south");

  const auto x = MixedDataset(50, Task::kRegression, 9).x;
  const auto a = model.PredictBatch(x);
  const auto b = back.PredictBatch(x);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
  for (std::uint32_t m = 0; m < 8; ++m) {
    std::vector<double> u(2), v(2);
    model.PredictMasked(std::span<const double>(x.row(3).data(), 3), FeatureSet(m), u);
    back.PredictMasked(std::span<const double>(x.row(3).data(), 3), FeatureSet(m), v);
    EXPECT_EQ(u, v);
  }
  // Serialization is a pure function of the model.
  EXPECT_EQ(SerializeModel(back), SerializeModel(model));
}

TEST(ModelFile, SurrogateRoundTripIsBitIdentical) {
  const auto data = MixedDataset(300, Task::kClassification, 2);
  SurrogateConfig cfg;
  cfg.hidden = {16};
  cfg.epochs = 2;
  cfg.seed = 4;
  const auto model = TrainSurrogate(data, ShapKernelWeights(3), cfg);
  const auto back = DeserializeSurrogate(SerializeModel(model, {{"epochs", "2"}}));
  EXPECT_EQ(back.task(), Task::kClassification);
  EXPECT_EQ(back.output_dim(), 2);

  std::vector<FeatureSet> masks;
  for (int i = 0; i < data.num_rows(); ++i) masks.push_back(FeatureSet(i % 8));
  RowMatrix a, b;
  model.EvaluateMasked(data.x, masks, a);
  back.EvaluateMasked(data.x, masks, b);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(ModelFile, AmortizedHeadRoundTripIsBitIdentical) {
  const auto data = MixedDataset(40, Task::kRegression, 3);
  FeatureEncoder enc(data.features, data.x);
  Mlp net(MlpSpec{enc.encoded_dim(), {8}, 6}, 17);
  const AmortizedHead head(3, 1, 2, enc, net, 0.7, false);
  const auto back = DeserializeAmortizedHead(SerializeModel(head));
  EXPECT_EQ(back.order(), 2);
  EXPECT_EQ(back.tuples(), head.tuples());
  const auto a = head.RawBatch(data.x);
  const auto b = back.RawBatch(data.x);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(ModelFile, TruncationIsReportedAsCorruption) {
  const std::string bytes = SerializeModel(RandomModel(1, 6));
  for (double frac : {0.0, 0.1, 0.5, 0.9, 0.999}) {
    const auto cut = bytes.substr(0, static_cast<std::size_t>(frac * bytes.size()));
    EXPECT_THROW(DeserializeAdditiveModel(cut), CorruptModelError) << frac;
  }
}

TEST(ModelFile, TamperedPayloadFailsChecksum) {
  std::string bytes = SerializeModel(RandomModel(1, 7));
  const auto pos = bytes.find("\"c\": 1");
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, 6, "\"c\": 2");
  try {
    DeserializeAdditiveModel(bytes);
    FAIL() << "expected a corruption error";
  } catch (const CorruptModelError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
}

TEST(ModelFile, VersionMismatchIsDistinct) {
  std::string bytes = SerializeModel(RandomModel(1, 8));
  const std::string tag = "\"format_version\": " + std::to_string(kModelFormatVersion);
  const auto pos = bytes.find(tag);
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, tag.size(), "\"format_version\": 99");
  EXPECT_THROW(DeserializeAdditiveModel(bytes), ModelVersionError);
  EXPECT_THROW(PeekModelKind(bytes), ModelVersionError);
}

TEST(ModelFile, WrongKindIsRejected) {
  const auto bytes = SerializeModel(RandomModel(1, 9));
  EXPECT_THROW(DeserializeSurrogate(bytes), InvalidArgument);
  EXPECT_THROW(DeserializeAmortizedHead(bytes), InvalidArgument);
}

TEST(ModelFile, MissingFileIsAnArgumentError) {
  EXPECT_THROW(ReadFileBytes("/nonexistent/dir/model.json"), InvalidArgument);
}

std::vector<std::vector<std::string>> ReadCsv(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST(ShapeCsv, PairGridMatchesShapeValues) {
  const auto model = RandomModel(1, 10);
  const ShapeFunction* s = model.Find(FeatureSet::FromIndices({0, 2}));
  ASSERT_NE(s, nullptr);
  const std::string path = TempPath("shape.csv");
  WriteShapeCsv(model, *s, path, {{-1.0, 0.0, 0.5}, {}});
  const auto rows = ReadCsv(path);
  std::remove(path.c_str());
  ASSERT_EQ(rows.size(), 1u + 3 * 3);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"age", "site", "value"}));
  EXPECT_EQ(rows[1][0], "-1");
  EXPECT_EQ(rows[1][1], "north");
  EXPECT_EQ(rows[3][1], "east");
  EXPECT_EQ(rows[4][0], "0");
  std::vector<double> x = {0.5, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(std::stod(rows[8][2]), (*s)(x)[0]);
}

TEST(ShapeCsv, DefaultGridIsKnotsAndNamesEachOutput) {
  auto model = RandomModel(2, 11);
  model.class_names = {"low", "high"};
  const ShapeFunction* s = model.Find(FeatureSet::FromIndices({1}));
  const std::string path = TempPath("shape1.csv");
  WriteShapeCsv(model, *s, path);
  const auto rows = ReadCsv(path);
  std::remove(path.c_str());
  EXPECT_EQ(rows[0], (std::vector<std::string>{"load", "value_low", "value_high"}));
  EXPECT_EQ(rows.size(), 1 + s->axes()[0].knots.size());
  EXPECT_DOUBLE_EQ(std::stod(rows[1][0]), s->axes()[0].knots.front());
}

TEST(ShapeCsv, RejectsGridCountMismatch) {
  const auto model = RandomModel(1, 12);
  EXPECT_THROW(WriteShapeCsv(model, *model.Find(FeatureSet::FromIndices({1})), TempPath("x.csv"),
                             {{0.0}, {1.0}}),
               InvalidArgument);
}

}  // namespace
}  // namespace instashap
