#include <gtest/gtest.h>

#include <algorithm>

#include "falldet/metrics.hpp"

using namespace falldet;

TEST(Metrics, IdenticalVectorsGiveDiagonal) {
  std::vector<int> y = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 3, 3};
  ConfusionMatrix cm = ConfusionMatrix::from(y, y);
  for (int t = 0; t < 12; ++t) {
    for (int p = 0; p < 12; ++p) {
      if (t != p) EXPECT_EQ(cm.count(t, p), 0);
    }
  }
  EXPECT_EQ(cm.count(3, 3), 3);
  EvalReport r = report(cm);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.weighted_f1, 1.0);
  EXPECT_DOUBLE_EQ(r.weighted_precision, 1.0);
  EXPECT_DOUBLE_EQ(r.weighted_recall, 1.0);
}

TEST(Metrics, HandCountedCells) {
  ConfusionMatrix cm = ConfusionMatrix::from({0, 0, 1}, {0, 1, 1});
  EXPECT_EQ(cm.count(0, 0), 1);
  EXPECT_EQ(cm.count(0, 1), 1);
  EXPECT_EQ(cm.count(1, 1), 1);
  EXPECT_EQ(cm.total(), 3);
}

TEST(Metrics, CellSumsEqualLength) {
  Rng rng = make_rng(5);
  std::uniform_int_distribution<int> label(0, 11);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 1 + trial * 13;
    std::vector<int> t(static_cast<size_t>(n)), p(static_cast<size_t>(n));
    for (auto& v : t) v = label(rng);
    for (auto& v : p) v = label(rng);
    ConfusionMatrix cm = ConfusionMatrix::from(t, p);
    EXPECT_EQ(cm.total(), n);
    long long recount = 0;
    for (int i = 0; i < 12; ++i) recount += cm.support(i);
    EXPECT_EQ(recount, n);
  }
}

TEST(Metrics, TwoClassHandDerivedValues) {
  // cm [[1,1],[0,1]]
  ConfusionMatrix cm(2);
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(1, 1);
  EvalReport r = report(cm);
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.5);
  EXPECT_NEAR(r.per_class[0].f1, 2.0 / 3, 1e-12);
  EXPECT_DOUBLE_EQ(r.per_class[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[1].recall, 1.0);
  EXPECT_NEAR(r.per_class[1].f1, 2.0 / 3, 1e-12);
  EXPECT_NEAR(r.accuracy, 2.0 / 3, 1e-12);
}

TEST(Metrics, ZeroSupportClassFlagsWarningAndContributesZeroToMacro) {
  ConfusionMatrix cm(3);
  cm.add(0, 0);
  cm.add(1, 1);  // class 2 never appears
  EvalReport r = report(cm);
  EXPECT_TRUE(r.zero_support_warning);
  EXPECT_DOUBLE_EQ(r.per_class[2].precision, 0.0);
  EXPECT_DOUBLE_EQ(r.per_class[2].recall, 0.0);
  EXPECT_DOUBLE_EQ(r.per_class[2].f1, 0.0);
  EXPECT_NEAR(r.macro_f1, 2.0 / 3, 1e-12);  // (1 + 1 + 0) / 3
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
}

TEST(Metrics, JointPermutationLeavesReportUnchanged) {
  Rng rng = make_rng(17);
  std::uniform_int_distribution<int> label(0, 11);
  int n = 300;
  std::vector<int> t(static_cast<size_t>(n)), p(static_cast<size_t>(n));
  for (auto& v : t) v = label(rng);
  for (auto& v : p) v = label(rng);
  EvalReport a = report(ConfusionMatrix::from(t, p));

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> t2(static_cast<size_t>(n)), p2(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    t2[static_cast<size_t>(i)] = t[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    p2[static_cast<size_t>(i)] = p[static_cast<size_t>(idx[static_cast<size_t>(i)])];
  }
  EvalReport b = report(ConfusionMatrix::from(t2, p2));
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.weighted_f1, b.weighted_f1);
  EXPECT_EQ(a.macro_precision, b.macro_precision);
  EXPECT_EQ(a.confusion, b.confusion);
}

TEST(Metrics, AccuracyEqualsWeightedRecall) {
  Rng rng = make_rng(23);
  std::uniform_int_distribution<int> label(0, 11);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 50 + trial * 17;
    std::vector<int> t(static_cast<size_t>(n)), p(static_cast<size_t>(n));
    for (auto& v : t) v = label(rng);
    for (auto& v : p) v = label(rng);
    EvalReport r = report(ConfusionMatrix::from(t, p));
    EXPECT_NEAR(r.accuracy, r.weighted_recall, 1e-12);
  }
}

TEST(Metrics, AllValuesWithinUnitInterval) {
  Rng rng = make_rng(29);
  std::uniform_int_distribution<int> label(0, 11);
  std::vector<int> t(200), p(200);
  for (auto& v : t) v = label(rng);
  for (auto& v : p) v = label(rng);
  EvalReport r = report(ConfusionMatrix::from(t, p));
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  EXPECT_TRUE(in_unit(r.accuracy));
  EXPECT_TRUE(in_unit(r.macro_precision) && in_unit(r.macro_recall) && in_unit(r.macro_f1));
  EXPECT_TRUE(in_unit(r.weighted_precision) && in_unit(r.weighted_recall) && in_unit(r.weighted_f1));
  for (const auto& c : r.per_class) {
    EXPECT_TRUE(in_unit(c.precision) && in_unit(c.recall) && in_unit(c.f1));
  }
}

TEST(Metrics, RejectsBadInput) {
  EXPECT_THROW(ConfusionMatrix::from({0, 1}, {0}), ValueError);
  ConfusionMatrix cm(2);
  EXPECT_THROW(cm.add(2, 0), ValueError);
  EXPECT_THROW(cm.add(0, -1), ValueError);
  EXPECT_THROW(report(ConfusionMatrix(2)), ValueError);
}

TEST(Metrics, JsonRoundTrip) {
  ConfusionMatrix cm(3);
  cm.add(0, 0);
  cm.add(1, 2);
  cm.add(2, 2);
  cm.add(1, 1);
  EvalReport r = report(cm, "C1+C2");
  EvalReport back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.config_tag, "C1+C2");
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.weighted_f1, r.weighted_f1);
  EXPECT_EQ(back.macro_f1, r.macro_f1);
  EXPECT_EQ(back.confusion, r.confusion);
  ASSERT_EQ(back.per_class.size(), r.per_class.size());
  for (size_t i = 0; i < r.per_class.size(); ++i) {
    EXPECT_EQ(back.per_class[i].f1, r.per_class[i].f1);
    EXPECT_EQ(back.per_class[i].support, r.per_class[i].support);
  }
}

TEST(Metrics, RenderedRowUsesTwoDecimalPercentages) {
  ConfusionMatrix cm(2);
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(1, 1);
  EvalReport r = report(cm, "S");
  std::string row = render_report_row("S", "xgb-like", r);
  EXPECT_NE(row.find("66.67"), std::string::npos) << row;
  EXPECT_NE(row.find("xgb-like"), std::string::npos);
}
