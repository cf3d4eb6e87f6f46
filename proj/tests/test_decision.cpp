#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "anthro/decision.hpp"

using namespace anthro;

namespace {

// Synthetic feature rows: lesion stacks get +shift on every lesion feature.
std::vector<FeatureRow> toy_rows(std::uint64_t seed, int n_per_class, int level, double shift) {
  auto rng = make_engine(seed, level, "toy");
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 2 * n_per_class; ++i) {
    FeatureRow r;
    r.stack_id = static_cast<std::uint64_t>(level * 1000 + i + 1);
    r.label = i % 2 ? Label::lesion : Label::healthy;
    r.level = level;
    const double s = r.label == Label::lesion ? shift : 0.0;
    r.lesion = {s + g(rng), s + g(rng), s + g(rng)};
    rows.push_back(r);
  }
  return rows;
}

std::vector<DecisionInput> inputs_of(const std::vector<FeatureRow>& rows) {
  std::vector<DecisionInput> in;
  for (const auto& r : rows) in.push_back({&r, &r});
  return in;
}

const FeatureScale kUnit{1.0, 1.0, 1.0};

}  // namespace

TEST(Rank, Examples) {
  const std::vector<std::uint64_t> ids{1, 2, 3};
  EXPECT_EQ(rank_by_feature(std::vector<double>{10, 30, 20}, ids), (std::vector<int>{1, 3, 2}));
  EXPECT_EQ(rank_by_feature(std::vector<double>{5, 5, 5}, std::vector<std::uint64_t>{9, 3, 7}),
            (std::vector<int>{3, 1, 2}));
  EXPECT_THROW(rank_by_feature(std::vector<double>{1, NAN}, std::vector<std::uint64_t>{1, 2}), DataError);
  EXPECT_THROW(rank_by_feature(std::vector<double>{1}, ids), DataError);
}

TEST(Rank, IsAPermutation) {
  auto rng = make_engine(1, 1, "test");
  std::uniform_int_distribution<int> u(0, 20);
  std::vector<double> v(300);
  std::vector<std::uint64_t> ids(300);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = u(rng);
    ids[i] = 1000 - i;
  }
  auto r = rank_by_feature(v, ids);
  std::vector<int> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 300; ++i) EXPECT_EQ(sorted[i], i + 1);
  for (std::size_t a = 0; a < v.size(); ++a)
    for (std::size_t b = 0; b < v.size(); ++b)
      if (v[a] < v[b] || (v[a] == v[b] && ids[a] < ids[b])) {
        ASSERT_LT(r[a], r[b]);
      }
}

TEST(MinRank, FusionExample) {
  const std::vector<int> r1{2, 1, 3, 4, 5}, r2{2, 3, 1, 4, 5}, r3{1, 3, 2, 4, 5};
  EXPECT_EQ(min_rank_combine(r1, r2, r3), (std::vector<int>{1, 1, 1, 4, 5}));
  EXPECT_THROW(min_rank_combine(r1, r2, std::vector<int>{1}), DataError);
}

TEST(Perturb, ZeroComplexityOrKappaIsIdentity) {
  const LesionFeatures lf{1.5, -2.0, 3.25};
  auto rng = make_engine(1, 1, "decision");
  for (auto [c, k] : {std::pair{0.0, 8.0}, std::pair{1.0, 0.0}}) {
    const auto out = perturb_features(lf, c, k, kUnit, rng);
    EXPECT_EQ(out.f1, lf.f1);
    EXPECT_EQ(out.f2, lf.f2);
    EXPECT_EQ(out.f3, lf.f3);
  }
  EXPECT_THROW(perturb_features(lf, 1.5, 8, kUnit, rng), DataError);
  EXPECT_THROW(perturb_features(lf, 0.5, 8, FeatureScale{1, 0, 1}, rng), DataError);
}

TEST(Perturb, NoiseStdIsKappaTimesScale) {
  auto rng = make_engine(2, 2, "decision");
  const LesionFeatures lf{0, 0, 0};
  const int n = 100000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = perturb_features(lf, 1.0, 8.0, kUnit, rng).f2;
    s1 += v;
    s2 += v * v;
  }
  const double sd = std::sqrt(s2 / n - (s1 / n) * (s1 / n));
  EXPECT_NEAR(sd, 8.0, 0.1);
}

TEST(FeatureScale, SampleStd) {
  const std::vector<LesionFeatures> v{{1, 0, 5}, {3, 0, 5}, {5, 2, 5}};
  const auto s = feature_scale(v);
  EXPECT_DOUBLE_EQ(s[0], 2.0);
  EXPECT_NEAR(s[1], std::sqrt(4.0 / 3.0), 1e-12);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_THROW(feature_scale(std::vector<LesionFeatures>{{1, 1, 1}}), InsufficientDataError);
}

TEST(Decide, NoneModeMatchesZeroKappa) {
  const auto rows = toy_rows(1, 30, 4, 1.0);
  const auto in = inputs_of(rows);
  DecisionConfig none;
  none.mode = EstimationMode::none;
  DecisionConfig ideal;
  ideal.mode = EstimationMode::ideal;
  ideal.kappa = 0;
  const auto a = decide_dataset(in, nullptr, none, kUnit);
  const auto b = decide_dataset(in, nullptr, ideal, kUnit);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_EQ(a[i].perturbed.f1, rows[i].lesion.f1);
  }
}

TEST(Decide, IdealModeAtLevelZeroIsUnperturbed) {
  const auto rows = toy_rows(2, 10, 0, 1.0);
  DecisionConfig cfg;
  cfg.mode = EstimationMode::ideal;
  const auto out = decide_dataset(inputs_of(rows), nullptr, cfg, kUnit);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].c_hat, 0.0);
    EXPECT_EQ(out[i].perturbed.f3, rows[i].lesion.f3);
  }
}

TEST(Decide, EstimatorModesNeedAModel) {
  const auto rows = toy_rows(3, 5, 2, 1.0);
  DecisionConfig cfg;
  cfg.mode = EstimationMode::post_hvs;
  EXPECT_THROW(decide_dataset(inputs_of(rows), nullptr, cfg, kUnit), ConfigError);
  cfg.kappa = -1;
  cfg.mode = EstimationMode::none;
  EXPECT_THROW(decide_dataset(inputs_of(rows), nullptr, cfg, kUnit), ConfigError);
}

TEST(Decide, BinaryThresholdOnEstimator) {
  auto rows = toy_rows(4, 3, 2, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].complexity.b1 = static_cast<double>(i);
  HotellingModel m;
  m.w = {1.0};
  m.mu0 = m.mu1 = {0.0};
  m.feature_spec = {"b1"};
  m.calib_lo = 0;
  m.calib_hi = 4;
  DecisionConfig cfg;
  cfg.mode = EstimationMode::post_hvs;
  const auto bin = decide_dataset(inputs_of(rows), &m, cfg, kUnit);
  cfg.binary_complexity = false;
  const auto cont = decide_dataset(inputs_of(rows), &m, cfg, kUnit);
  const std::vector<double> expect_bin{0, 0, 1, 1, 1, 1}, expect_cont{0, 0.25, 0.5, 0.75, 1, 1};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(bin[i].c_hat, expect_bin[i]);
    EXPECT_DOUBLE_EQ(cont[i].c_hat, expect_cont[i]);
  }
}

TEST(Decide, DegradesMonotonicallyWithKappa) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto rows = toy_rows(seed, 200, 4, 1.5);
    double prev = 2.0;
    for (double kappa : {0.0, 2.0, 8.0, 32.0}) {
      DecisionConfig cfg;
      cfg.mode = EstimationMode::ideal;
      cfg.kappa = kappa;
      cfg.master_seed = seed;
      const double auc = score_roc(decide_dataset(inputs_of(rows), nullptr, cfg, kUnit)).auc;
      EXPECT_LT(auc, prev) << "seed " << seed << " kappa " << kappa;
      prev = auc;
    }
  }
}

TEST(Decide, ThreadCountDoesNotChangeScores) {
  const auto rows = toy_rows(5, 100, 3, 1.0);
  DecisionConfig cfg;
  cfg.mode = EstimationMode::ideal;
  const auto a = decide_dataset(inputs_of(rows), nullptr, cfg, kUnit, 1);
  const auto b = decide_dataset(inputs_of(rows), nullptr, cfg, kUnit, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].perturbed.f1, b[i].perturbed.f1);
    EXPECT_EQ(a[i].score, b[i].score);
  }
}

TEST(Decide, NoiseIsKeyedByStackNotPosition) {
  auto rows = toy_rows(6, 20, 4, 1.0);
  DecisionConfig cfg;
  cfg.mode = EstimationMode::ideal;
  const auto a = decide_dataset(inputs_of(rows), nullptr, cfg, kUnit);
  std::reverse(rows.begin(), rows.end());
  const auto b = decide_dataset(inputs_of(rows), nullptr, cfg, kUnit);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& other = b[b.size() - 1 - i];
    EXPECT_EQ(a[i].stack_id, other.stack_id);
    EXPECT_EQ(a[i].perturbed.f2, other.perturbed.f2);
    EXPECT_EQ(a[i].score, other.score);
  }
}

TEST(Decide, ScoresCsvRoundTrip) {
  const auto rows = toy_rows(7, 10, 4, 1.0);
  DecisionConfig cfg;
  cfg.mode = EstimationMode::ideal;
  const auto out = decide_dataset(inputs_of(rows), nullptr, cfg, kUnit);
  std::stringstream ss;
  write_scores_csv(ss, out);
  const auto back = read_scores_csv(ss);
  ASSERT_EQ(back.size(), out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(back[i].stack_id, out[i].stack_id);
    EXPECT_EQ(back[i].label, out[i].label);
    EXPECT_EQ(back[i].perturbed.f1, out[i].perturbed.f1);
    EXPECT_EQ(back[i].score, out[i].score);
  }
  EXPECT_DOUBLE_EQ(score_roc(back).auc, score_roc(out).auc);
  std::stringstream bad("nope\n");
  EXPECT_THROW(read_scores_csv(bad), DataError);
}

TEST(EstimationMode, StringRoundTrip) {
  for (auto m : {EstimationMode::none, EstimationMode::ideal, EstimationMode::pre_hvs, EstimationMode::post_hvs})
    EXPECT_EQ(estimation_mode_from_string(to_string(m)), m);
  EXPECT_THROW(estimation_mode_from_string("oracle"), ConfigError);
}
