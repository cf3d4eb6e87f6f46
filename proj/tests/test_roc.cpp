#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "anthro/decision.hpp"
#include "anthro/pipeline.hpp"
#include "anthro/roc.hpp"

using namespace anthro;

namespace {

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0;
  for (double p : pos)
    for (double n : neg) s += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  return s / (pos.size() * neg.size());
}

// Bisection on erf in long double.
long double erfinv_oracle(long double y) {
  long double lo = -10, hi = 10;
  for (int i = 0; i < 200; ++i) {
    const long double mid = (lo + hi) / 2;
    (std::erf(mid) < y ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

}  // namespace

TEST(Auc, HandExamples) {
  EXPECT_EQ(wilcoxon_auc(std::vector<double>{2, 3}, std::vector<double>{0, 1}), 1.0);
  EXPECT_EQ(wilcoxon_auc(std::vector<double>{0, 1}, std::vector<double>{2, 3}), 0.0);
  EXPECT_EQ(wilcoxon_auc(std::vector<double>{1, 1}, std::vector<double>{1, 1}), 0.5);
  EXPECT_EQ(wilcoxon_auc(std::vector<double>{1, 3}, std::vector<double>{2}), 0.5);
  EXPECT_EQ(wilcoxon_auc(std::vector<double>{2}, std::vector<double>{1, 2}), 0.75);
  EXPECT_THROW(wilcoxon_auc(std::vector<double>{}, std::vector<double>{1}), InsufficientDataError);
  EXPECT_THROW(wilcoxon_auc(std::vector<double>{NAN}, std::vector<double>{1}), DataError);
}

TEST(Auc, MatchesBruteForceWithTies) {
  auto rng = make_engine(4, 4, "test");
  std::uniform_int_distribution<int> size(1, 200), val(0, 15);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> pos(size(rng)), neg(size(rng));
    for (double& v : pos) v = val(rng) + 1;
    for (double& v : neg) v = val(rng);
    const double a = wilcoxon_auc(pos, neg);
    EXPECT_NEAR(a, brute_auc(pos, neg), 1e-12);
    EXPECT_NEAR(a + wilcoxon_auc(neg, pos), 1.0, 1e-12);
  }
}

TEST(Erfinv, MatchesBisectionOracle) {
  for (double y = -0.999; y < 1.0; y += 0.0137)
    EXPECT_NEAR(erfinv(y), static_cast<double>(erfinv_oracle(y)), 1e-10) << y;
  for (double y : {1e-9, 0.5, 0.9999, -0.99999})
    EXPECT_NEAR(erfinv(y), static_cast<double>(erfinv_oracle(y)), 1e-10) << y;
  EXPECT_EQ(erfinv(0.0), 0.0);
  EXPECT_TRUE(std::isinf(erfinv(1.0)));
  EXPECT_TRUE(std::isnan(erfinv(1.5)));
}

TEST(Dprime, ReportedPairs) {
  const std::pair<double, double> pairs[] = {{0.97, 2.66}, {0.92, 1.99}, {0.986, 3.11},
                                             {0.675, 0.64}, {0.926, 2.05}, {0.606, 0.38}};
  for (auto [auc, d] : pairs) EXPECT_NEAR(dprime(auc).value, d, 0.01) << auc;
  EXPECT_EQ(dprime(0.5).value, 0.0);
  EXPECT_LT(dprime(0.3).value, 0.0);
}

TEST(Dprime, SaturatesAtEndpoints) {
  EXPECT_TRUE(dprime(1.0).saturated);
  EXPECT_TRUE(std::isinf(dprime(1.0).value));
  EXPECT_TRUE(dprime(0.0).saturated);
  EXPECT_FALSE(dprime(0.999).saturated);
  EXPECT_THROW(dprime(1.01), DataError);
}

TEST(Histogram, BinsOnReaderScale) {
  EXPECT_EQ(score_histogram(std::vector<double>{0, 0, 3, 3}, 4, 0, 3), (std::vector<std::size_t>{2, 0, 0, 2}));
  EXPECT_EQ(score_histogram(std::vector<double>{1, 2, 3, 4, 5}, 4, 1, 5), (std::vector<std::size_t>{1, 1, 1, 2}));
  EXPECT_THROW(score_histogram(std::vector<double>{4}, 4, 0, 3), DataError);
  EXPECT_THROW(score_histogram(std::vector<double>{1}, 1, 0, 3), DataError);
  EXPECT_THROW(scale_scores(std::vector<double>{1}, 2, 2), DataError);
}

TEST(Histogram, MinRankPushesScoresDown) {
  // The fused ranks sit at or below every sub-decision's rank, so the
  // histogram mass moves toward low scores.
  const std::vector<int> r1{2, 1, 3, 4, 5}, r2{2, 3, 1, 4, 5}, r3{1, 3, 2, 4, 5};
  const auto fused = min_rank_combine(r1, r2, r3);
  const std::vector<double> f(fused.begin(), fused.end()), one(r1.begin(), r1.end());
  const auto hf = score_histogram(f, 4, 1, 5), h1 = score_histogram(one, 4, 1, 5);
  EXPECT_EQ(hf, (std::vector<std::size_t>{3, 0, 0, 2}));
  EXPECT_EQ(h1, (std::vector<std::size_t>{1, 1, 1, 2}));
}

TEST(GroupedCi, IdenticalInstancesHaveZeroWidth) {
  const std::vector<double> same{0.8, 0.8, 0.8};
  const auto r = grouped_ci(same, 10, 10);
  EXPECT_DOUBLE_EQ(r.auc, 0.8);
  EXPECT_EQ(*r.ci_halfwidth, 0.0);
  const std::vector<double> spread{0.6, 0.7, 0.8, 0.9};
  const auto s = grouped_ci(spread, 10, 10);
  EXPECT_NEAR(s.auc, 0.75, 1e-12);
  EXPECT_GE(s.auc, 0.6);
  EXPECT_LE(s.auc, 0.9);
  EXPECT_NEAR(*s.ci_halfwidth, 2 * std::sqrt(0.05 / 3), 1e-12);
  EXPECT_THROW(grouped_ci(std::vector<double>{}, 1, 1), InsufficientDataError);
}
