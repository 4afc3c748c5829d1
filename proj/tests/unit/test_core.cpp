#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "predset/core.hpp"

using namespace predset;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;  // sentinel: nothing thrown
}

}  // namespace

TEST(ProbVector, AcceptsExactAndRenormalizesNearSums) {
  const auto f = ProbVector::make({0.2, 0.3, 0.5});
  EXPECT_EQ(f.size(), 3U);
  EXPECT_DOUBLE_EQ(f[2], 0.5);
  const auto g = ProbVector::make({0.2, 0.3, 0.49}, 0.02);
  EXPECT_NEAR(g[0] + g[1] + g[2], 1.0, 1e-15);
  EXPECT_NEAR(g[2], 0.49 / 0.99, 1e-15);
}

TEST(ProbVector, RejectsBadSumsAndEntries) {
  EXPECT_EQ(code_of([] { ProbVector::make({0.2, 0.3, 0.4}); }), ErrorCode::ScoreSumOutOfTolerance);
  EXPECT_EQ(code_of([] { ProbVector::make({0.5, 0.4}, 0.02); }), ErrorCode::ScoreSumOutOfTolerance);
  EXPECT_THROW(ProbVector::make({-0.1, 1.1}), Error);
  EXPECT_THROW(ProbVector::make({std::nan(""), 1.0}), Error);
}

TEST(ProbVector, UniformAndPointMass) {
  const auto u = ProbVector::uniform(4);
  for (double x : u.values()) EXPECT_DOUBLE_EQ(x, 0.25);
  const auto p = ProbVector::point_mass(3, 1);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[1], 1.0);
}

TEST(ValidateConfusion, IdentityUnchanged) {
  const auto c = validate_confusion({{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_EQ(c, ConfusionMatrix::identity(2));
}

TEST(ValidateConfusion, RenormalizesColumnWithinTolerance) {
  const auto c = validate_confusion(oracle::counterexample_rows(), 0.02);
  for (LabelId p = 0; p < 3; ++p) EXPECT_NEAR(c.at(p, 0), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(c.at(0, 1), 0.4);
  EXPECT_DOUBLE_EQ(c.at(1, 1), 0.6);
  EXPECT_DOUBLE_EQ(c.at(2, 1), 0.0);
  double sum = 0.0;
  for (LabelId p = 0; p < 3; ++p) sum += c.at(p, 0);
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(ValidateConfusion, ColumnFarFromOneNamesTheColumn) {
  try {
    validate_confusion({{1.0, 0.25}, {0.0, 0.25}}, 0.02);
    FAIL() << "expected ColumnSumOutOfTolerance";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ColumnSumOutOfTolerance);
    EXPECT_NE(std::string(e.what()).find("column 1"), std::string::npos) << e.what();
  }
}

TEST(ValidateConfusion, RejectsNegativeAndNonFinite) {
  EXPECT_EQ(code_of([] { validate_confusion({{1.1, 0.0}, {-0.1, 1.0}}); }), ErrorCode::NegativeEntry);
  EXPECT_EQ(code_of([] {
              validate_confusion({{std::numeric_limits<double>::infinity(), 0.0}, {0.0, 1.0}});
            }),
            ErrorCode::NonFiniteEntry);
  EXPECT_THROW(validate_confusion({{1.0, 0.0}}), Error);
}

TEST(NormalizeCounts, DiagonalCountsGiveIdentity) {
  EXPECT_EQ(normalize_counts({{2, 0}, {0, 2}}), ConfusionMatrix::identity(2));
}

TEST(NormalizeCounts, SymmetricCountsGiveHalves) {
  const auto c = normalize_counts({{1, 1}, {1, 1}});
  for (double x : c.entries()) EXPECT_DOUBLE_EQ(x, 0.5);
}

TEST(NormalizeCounts, SmoothingFillsEmptyColumns) {
  const auto c = normalize_counts({{0, 0}, {0, 0}}, 1.0);
  for (double x : c.entries()) EXPECT_DOUBLE_EQ(x, 0.5);
}

TEST(NormalizeCounts, EmptyColumnWithoutSmoothingFails) {
  EXPECT_EQ(code_of([] { normalize_counts({{3, 0}, {1, 0}}); }), ErrorCode::EmptyColumnWithoutSmoothing);
}

TEST(NormalizeCounts, SmoothedOutputIsAlwaysColumnStochastic) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> count(0, 5);
  std::uniform_int_distribution<std::size_t> size(1, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t l = size(gen);
    std::vector<std::vector<std::uint64_t>> counts(l, std::vector<std::uint64_t>(l));
    for (auto& row : counts) {
      for (auto& x : row) x = static_cast<std::uint64_t>(count(gen));
    }
    const double s = 0.01 + 0.5 * (trial % 3);
    const auto c = normalize_counts(counts, s);
    for (LabelId t = 0; t < l; ++t) {
      double col = 0.0;
      std::uint64_t total = 0;
      for (LabelId p = 0; p < l; ++p) total += counts[p][t];
      for (LabelId p = 0; p < l; ++p) {
        EXPECT_GE(c.at(p, t), 0.0);
        EXPECT_NEAR(c.at(p, t), (static_cast<double>(counts[p][t]) + s) /
                                    (static_cast<double>(total) + static_cast<double>(l) * s),
                    1e-15);
        col += c.at(p, t);
      }
      EXPECT_NEAR(col, 1.0, 1e-9);
    }
  }
}

TEST(PredictionSet, SortsAndRejectsDuplicates) {
  const PredictionSet s{3, 0, 2};
  EXPECT_EQ(oracle::members_of(s), (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_TRUE(s.contains(2));
  EXPECT_FALSE(s.contains(1));
  EXPECT_EQ(s.to_display(), "{1,3,4}");
  EXPECT_EQ(s.to_field(), "0 2 3");
  EXPECT_THROW((PredictionSet{1, 1}), Error);
}

TEST(PredictionSet, FullAndMask) {
  EXPECT_EQ(PredictionSet::full(3), (PredictionSet{0, 1, 2}));
  EXPECT_EQ(PredictionSet::from_mask(0b1010), (PredictionSet{1, 3}));
  EXPECT_TRUE(PredictionSet::from_mask(0).empty());
}

TEST(Dataset, ValidateChecksLabels) {
  Dataset ds;
  ds.label_count = 2;
  ds.records.push_back({"a", ProbVector::make({0.5, 0.5}), 1, std::nullopt, std::nullopt});
  EXPECT_NO_THROW(ds.validate());
  ds.records.push_back({"b", ProbVector::make({0.5, 0.5}), 2, std::nullopt, std::nullopt});
  EXPECT_THROW(ds.validate(), Error);
  ds.records.back().true_label = 0;
  ds.records.back().human_pred = 5;
  EXPECT_THROW(ds.validate(), Error);
  ds.records.back().human_pred.reset();
  ds.records.push_back({"c", ProbVector::make({0.2, 0.3, 0.5}), 0, std::nullopt, std::nullopt});
  EXPECT_THROW(ds.validate(), Error);
}

TEST(RngStream, IdenticalKeysGiveIdenticalDraws) {
  RngStream a(42, "run/0/task");
  RngStream b(42, "run/0/task");
  for (int i = 0; i < 10000; ++i) {
    ASSERT_EQ(a.next_u64(), b.next_u64()) << "draw " << i;
  }
  RngStream c(42, "run/0/task");
  RngStream d(42, "run/0/task");
  for (int i = 0; i < 10000; ++i) {
    ASSERT_EQ(c.normal(), d.normal());
    ASSERT_EQ(c.uniform(), d.uniform());
  }
}

TEST(RngStream, DifferentKeysOrSeedsDiverge) {
  RngStream a(42, "run/0/task");
  RngStream b(42, "run/1/task");
  RngStream c(43, "run/0/task");
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_EQ(a.child("x").key(), "run/0/task/x");
}

TEST(RngStream, UniformStaysInUnitInterval) {
  RngStream r(1, "u");
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(r.uniform_index(7), 7U);
}
