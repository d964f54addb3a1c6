#include "fairproxy/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace fairproxy;

namespace {

// n rows of group s with the given count of positive predictions.
void append_group(std::vector<int>& yhat, std::vector<int>& s, int group, int n, int positives) {
  for (int i = 0; i < n; ++i) {
    yhat.push_back(i < positives ? 1 : 0);
    s.push_back(group);
  }
}

}  // namespace

TEST(PRule, DirectFormula) {
  std::vector<int> yhat, s;
  append_group(yhat, s, 0, 10, 2);
  append_group(yhat, s, 1, 10, 4);
  EXPECT_DOUBLE_EQ(p_rule(yhat, s), 0.5);

  yhat.clear(), s.clear();
  append_group(yhat, s, 0, 10, 3);
  append_group(yhat, s, 1, 20, 6);
  EXPECT_DOUBLE_EQ(p_rule(yhat, s), 1.0);

  yhat.clear(), s.clear();
  append_group(yhat, s, 0, 10, 0);
  append_group(yhat, s, 1, 10, 5);
  EXPECT_DOUBLE_EQ(p_rule(yhat, s), 0.0);
}

TEST(PRule, BothRatesZeroIsOne) {
  EXPECT_DOUBLE_EQ(p_rule({0, 0, 0, 0}, {0, 1, 0, 1}), 1.0);
}

TEST(PRule, SymmetricAndPermutationInvariant) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution b(0.4), g(0.3);
  std::vector<int> yhat, s;
  for (int i = 0; i < 500; ++i) {
    yhat.push_back(b(rng));
    s.push_back(g(rng));
  }
  const double v = p_rule(yhat, s);
  std::vector<int> flipped(s);
  for (int& x : flipped) x = 1 - x;
  EXPECT_EQ(v, p_rule(yhat, flipped));
  std::vector<std::size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> py, ps;
  for (auto i : perm) {
    py.push_back(yhat[i]);
    ps.push_back(s[i]);
  }
  EXPECT_EQ(v, p_rule(py, ps));
}

TEST(PRule, Errors) {
  EXPECT_THROW(p_rule({1, 0}, {0, 0}), MetricError);
  EXPECT_THROW(p_rule({1, 2}, {0, 1}), MetricError);
  EXPECT_THROW(p_rule({1}, {0, 1}), MetricError);
}

TEST(Mistreatment, PerfectPredictionsHaveNone) {
  const std::vector<int> y{0, 1, 0, 1, 1, 0}, s{0, 0, 1, 1, 0, 1};
  const auto m = disparate_mistreatment(y, y, s);
  EXPECT_EQ(m.delta_fpr, 0.0);
  EXPECT_EQ(m.delta_fnr, 0.0);
}

TEST(Mistreatment, DirectFormula) {
  // 10 negatives per group: FPR 0.1 (s=0) vs 0.3 (s=1). 10 positives per group with FNR 0.2 each.
  std::vector<int> yhat, y, s;
  for (int g = 0; g < 2; ++g) {
    const int fp = g == 0 ? 1 : 3;
    for (int i = 0; i < 10; ++i) {
      y.push_back(0), s.push_back(g), yhat.push_back(i < fp);
      y.push_back(1), s.push_back(g), yhat.push_back(i >= 2);
    }
  }
  const auto m = disparate_mistreatment(yhat, y, s);
  EXPECT_NEAR(m.delta_fpr, 0.2, 1e-15);
  EXPECT_EQ(m.delta_fnr, 0.0);
  EXPECT_EQ(m.dm(), m.delta_fpr + m.delta_fnr);
}

TEST(Mistreatment, IndependentRandomPredictionsAreBalanced) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.5), g(0.4), lab(0.3);
  std::vector<int> yhat, y, s;
  for (int i = 0; i < 50000; ++i) {
    yhat.push_back(coin(rng));
    y.push_back(lab(rng));
    s.push_back(g(rng));
  }
  const auto m = disparate_mistreatment(yhat, y, s);
  EXPECT_LE(m.delta_fpr, 0.02);
  EXPECT_LE(m.delta_fnr, 0.02);
}

TEST(Mistreatment, EmptyCellNamesTheDelta) {
  try {
    disparate_mistreatment({0, 1, 1}, {0, 1, 1}, {0, 0, 1});
    FAIL();
  } catch (const MetricError& e) {
    EXPECT_NE(std::string(e.what()).find("FPR (s=1,y=0)"), std::string::npos);
  }
}

TEST(Report, ConstantPositiveClassifier) {
  const std::vector<int> y{1, 0, 0, 1, 0, 0, 0, 1}, s{0, 0, 0, 0, 1, 1, 1, 1};
  const auto r = metrics_report(std::vector<int>(8, 1), y, s);
  EXPECT_DOUBLE_EQ(r.p_rule, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 3.0 / 8.0);
}

TEST(Report, PerfectClassifierOnBalancedData) {
  const std::vector<int> y{1, 1, 0, 0, 1, 0, 0, 0}, s{0, 0, 0, 0, 1, 1, 1, 1};
  const auto r = metrics_report(y, y, s);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.p_rule, 0.25 / 0.5);
  EXPECT_EQ(r.dm, 0.0);
}

TEST(Report, RatesReproduceFromCounts) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution b(0.45);
  std::vector<int> yhat, y, s;
  for (int i = 0; i < 1000; ++i) {
    yhat.push_back(b(rng)), y.push_back(b(rng)), s.push_back(b(rng));
  }
  const auto r = metrics_report(yhat, y, s);
  const auto again = MetricsReport::from_counts(r.counts);
  EXPECT_EQ(r.to_json().dump(), again.to_json().dump());
  EXPECT_EQ(r.dm, r.delta_fpr + r.delta_fnr);
  EXPECT_EQ(r.n, 1000);
  const auto j = r.to_json();
  for (const char* key : {"accuracy", "p_rule", "delta_fpr", "delta_fnr", "dm", "positive_rate_s0", "tpr_s1", "fpr_s0",
                          "counts"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_FALSE(j.contains("hgr_pred_z"));
}

TEST(Threshold, HalfMapsToPositive) {
  EXPECT_EQ(threshold({0.49, 0.5, 0.51}), (std::vector<int>{0, 1, 1}));
}
