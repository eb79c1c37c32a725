#include <gtest/gtest.h>

#include <random>

#include "instashap/feature_set.hpp"
#include "instashap/set_function.hpp"

namespace instashap {
namespace {

SetFunctionTable RandomTable(int d, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  SetFunctionTable t(d, c);
  for (double& v : t.raw()) v = normal(rng);
  return t;
}

SetFunctionTable Cardinality(int d) {
  return SetFunctionTable::FromFunction(
      d, 1, [](FeatureSet s, std::span<double> out) { out[0] = s.size(); });
}

TEST(FeatureSet, BasicAlgebra) {
  const FeatureSet a = FeatureSet::FromIndices({0, 2});
  const FeatureSet b = FeatureSet::FromIndices({2, 3});
  EXPECT_EQ((a | b).bits(), 0b1101u);
  EXPECT_EQ((a & b).bits(), 0b0100u);
  EXPECT_EQ((a - b).bits(), 0b0001u);
  EXPECT_EQ(a.with(1).size(), 3);
  EXPECT_FALSE(a.without(2).contains(2));
  EXPECT_TRUE(FeatureSet::Singleton(2).is_subset_of(a));
  EXPECT_EQ(a.ToString(), "{1,3}");
  EXPECT_EQ(a.complement(4).bits(), 0b1010u);
  EXPECT_FALSE(b.fits(3));
}

TEST(FeatureSet, SubsetEnumerationVisitsEachSubsetOnce) {
  const FeatureSet m(0b10110u);
  std::vector<std::uint32_t> seen;
  ForEachSubset(m, [&](FeatureSet s) { seen.push_back(s.bits()); });
  ASSERT_EQ(seen.size(), 8u);
  for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_LT(seen[i - 1], seen[i]);
  for (auto s : seen) EXPECT_TRUE(FeatureSet(s).is_subset_of(m));
}

TEST(FeatureSet, ExhaustiveRangeGuard) {
  EXPECT_THROW(CheckExhaustive(26), InvalidArgument);
  EXPECT_THROW(CheckExhaustive(0), InvalidArgument);
  EXPECT_NO_THROW(CheckExhaustive(25));
  EXPECT_THROW(SetFunctionTable(26, 1), InvalidArgument);
}

TEST(Weights, ShapUniformTwoFeatures) {
  const WeightTable w = ShapUniformWeights(2);
  EXPECT_NEAR(w.per_subset[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w.per_subset[1], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(w.per_subset[2], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w.total(), 1.0, 1e-15);
}

TEST(Weights, ShapUniformOneFeature) {
  const WeightTable w = ShapUniformWeights(1);
  EXPECT_NEAR(w.weight(FeatureSet::Empty()), 0.5, 1e-15);
  EXPECT_NEAR(w.weight(FeatureSet::Singleton(0)), 0.5, 1e-15);
}

TEST(Weights, KernelThreeFeaturesIsUniformOnProperSubsets) {
  const WeightTable w = ShapKernelWeights(3);
  EXPECT_EQ(w.per_subset[0], 0.0);
  EXPECT_EQ(w.per_subset[3], 0.0);
  EXPECT_NEAR(w.per_subset[1], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(w.per_subset[2], 1.0 / 6.0, 1e-15);
}

TEST(Weights, KernelTwoFeatures) {
  const WeightTable w = ShapKernelWeights(2);
  EXPECT_NEAR(w.per_subset[1], 0.5, 1e-15);
  EXPECT_THROW(ShapKernelWeights(1), InvalidArgument);
}

TEST(Weights, NormalizedAndSizeSymmetricForAllD) {
  for (int d = 1; d <= 25; ++d) {
    const WeightTable u = ShapUniformWeights(d);
    EXPECT_NEAR(u.total(), 1.0, 1e-12) << d;
    for (int s = 0; s <= d; ++s) {
      EXPECT_NEAR(u.per_subset[s], u.per_subset[d - s], 1e-15 * (1 + u.per_subset[s]));
    }
    if (d < 2) continue;
    const WeightTable k = ShapKernelWeights(d);
    EXPECT_NEAR(k.total(), 1.0, 1e-12) << d;
    for (int s = 0; s <= d; ++s) {
      EXPECT_NEAR(k.per_subset[s], k.per_subset[d - s], 1e-15 * (1 + k.per_subset[s]));
    }
  }
  EXPECT_THROW(ShapUniformWeights(26), InvalidArgument);
}

TEST(Weights, SamplerMatchesSizeMasses) {
  const int d = 6;
  const WeightTable w = ShapKernelWeights(d);
  std::mt19937_64 rng(7);
  std::vector<int> counts(d + 1, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[SampleSubset(w, rng).size()];
  for (int s = 0; s <= d; ++s) {
    const double p = w.size_mass(s);
    const double se = std::sqrt(p * (1 - p) / n) + 1e-12;
    EXPECT_NEAR(counts[s] / double(n), p, 4 * se) << s;
  }
}

TEST(DiscreteDerivative, SingletonIsAddRemoveDifference) {
  std::mt19937_64 rng(1);
  const SetFunctionTable t = RandomTable(5, 2, rng);
  for (std::uint32_t tm = 0; tm < 32; ++tm) {
    for (int i = 0; i < 5; ++i) {
      const FeatureSet T(tm);
      const auto dd = DiscreteDerivative(t, FeatureSet::Singleton(i), T);
      for (int o = 0; o < 2; ++o) {
        EXPECT_DOUBLE_EQ(dd[o], t.at(T.with(i))[o] - t.at(T.without(i))[o]);
      }
    }
  }
}

TEST(DiscreteDerivative, EmptySetReturnsValue) {
  std::mt19937_64 rng(2);
  const SetFunctionTable t = RandomTable(4, 1, rng);
  for (std::uint32_t tm = 0; tm < 16; ++tm) {
    EXPECT_EQ(DiscreteDerivative(t, FeatureSet::Empty(), FeatureSet(tm))[0],
              t.value(FeatureSet(tm)));
  }
}

TEST(DiscreteDerivative, CardinalityPairVanishes) {
  const auto dd = DiscreteDerivative(Cardinality(2), FeatureSet(0b11u), FeatureSet::Empty());
  EXPECT_EQ(dd[0], 0.0);
}

TEST(Mobius, CardinalityTwoFeatures) {
  const PurifiedTable p = MobiusPurify(Cardinality(2));
  EXPECT_EQ(p.value(FeatureSet(0b00u)), 0.0);
  EXPECT_EQ(p.value(FeatureSet(0b01u)), 1.0);
  EXPECT_EQ(p.value(FeatureSet(0b10u)), 1.0);
  EXPECT_EQ(p.value(FeatureSet(0b11u)), 0.0);
}

TEST(Mobius, ConstantFunction) {
  const auto t = SetFunctionTable::FromFunction(
      6, 1, [](FeatureSet, std::span<double> out) { out[0] = 3.5; });
  const PurifiedTable p = MobiusPurify(t);
  EXPECT_EQ(p.value(FeatureSet::Empty()), 3.5);
  for (std::uint32_t m = 1; m < 64; ++m) EXPECT_EQ(p.value(FeatureSet(m)), 0.0);
}

TEST(Mobius, ZetaRoundTripRandomTables) {
  std::mt19937_64 rng(3);
  for (int d = 1; d <= 12; ++d) {
    const SetFunctionTable t = RandomTable(d, 2, rng);
    const SetFunctionTable back = ZetaTransform(MobiusPurify(t));
    double err = 0.0;
    for (std::size_t i = 0; i < t.raw().size(); ++i) {
      err = std::max(err, std::abs(t.raw()[i] - back.raw()[i]));
    }
    EXPECT_LT(err, 1e-10) << d;
  }
}

TEST(Mobius, MatchesDiscreteDerivativeAtEmptySet) {
  std::mt19937_64 rng(4);
  for (int d = 1; d <= 10; ++d) {
    const SetFunctionTable t = RandomTable(d, 1, rng);
    const PurifiedTable p = MobiusPurify(t);
    for (std::uint32_t m = 0; m < (1u << d); ++m) {
      const double dd = DiscreteDerivative(t, FeatureSet(m), FeatureSet::Empty())[0];
      EXPECT_NEAR(p.value(FeatureSet(m)), dd, 1e-10);
    }
  }
}

}  // namespace
}  // namespace instashap
