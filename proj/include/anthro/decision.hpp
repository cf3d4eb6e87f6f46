#pragma once

// Complexity-modulated feature noise followed by minimum-rank fusion of the
// three lesion sub-decisions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "anthro/core.hpp"
#include "anthro/feature_table.hpp"
#include "anthro/features.hpp"
#include "anthro/hotelling.hpp"
#include "anthro/rng.hpp"
#include "anthro/stackgen.hpp"

namespace anthro {

enum class EstimationMode { none, ideal, pre_hvs, post_hvs };

inline const char* to_string(EstimationMode m) {
  switch (m) {
    case EstimationMode::none: return "none";
    case EstimationMode::ideal: return "ideal";
    case EstimationMode::pre_hvs: return "pre-hvs";
    case EstimationMode::post_hvs: return "post-hvs";
  }
  return "?";
}

inline EstimationMode estimation_mode_from_string(const std::string& s) {
  if (s == "none") return EstimationMode::none;
  if (s == "ideal") return EstimationMode::ideal;
  if (s == "pre-hvs" || s == "pre_hvs") return EstimationMode::pre_hvs;
  if (s == "post-hvs" || s == "post_hvs") return EstimationMode::post_hvs;
  throw ConfigError("unknown estimation mode '" + s + "'");
}

struct DecisionConfig {
  double kappa = 8.0;
  EstimationMode mode = EstimationMode::post_hvs;
  bool binary_complexity = true;  // estimator output thresholded at 0.5
  std::string rng_tag = "decision";
  std::uint64_t master_seed = 20150221;

  void validate() const {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be finite and >= 0");
    if (rng_tag.empty()) throw ConfigError("decision rng tag must not be empty");
  }
};

/// Per-feature noise unit: std of f1, f2, f3 over training simple stacks.
using FeatureScale = std::array<double, 3>;

inline FeatureScale feature_scale(std::span<const LesionFeatures> simple) {
  if (simple.size() < 2) throw InsufficientDataError("feature scale needs >= 2 simple stacks");
  FeatureScale s{};
  for (int j = 0; j < 3; ++j) {
    std::vector<double> v;
    v.reserve(simple.size());
    for (const auto& lf : simple) v.push_back(j == 0 ? lf.f1 : j == 1 ? lf.f2 : lf.f3);
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    s[j] = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

/// f_j' = f_j + N(0, (kappa c_hat s_j)^2). Three normals are always drawn so
/// the stream position does not depend on c_hat.
inline LesionFeatures perturb_features(const LesionFeatures& lf, double c_hat, double kappa,
                                       const FeatureScale& s, Engine& rng) {
  if (!(c_hat >= 0.0 && c_hat <= 1.0)) throw DataError("c_hat outside [0, 1]");
  for (double sj : s)
    if (!(sj > 0.0)) throw DataError("feature scale must be positive");
  std::normal_distribution<double> n01(0.0, 1.0);
  const double z1 = n01(rng), z2 = n01(rng), z3 = n01(rng);
  const double g = kappa * c_hat;
  return {lf.f1 + g * s[0] * z1, lf.f2 + g * s[1] * z2, lf.f3 + g * s[2] * z3};
}

/// Ranks 1..N, ascending in value; equal values are ordered by stack id.
inline std::vector<int> rank_by_feature(std::span<const double> values, std::span<const std::uint64_t> ids) {
  if (values.size() != ids.size()) throw DataError("rank_by_feature: length mismatch");
  if (values.empty()) throw InsufficientDataError("rank_by_feature: no values");
  for (double v : values)
    if (!std::isfinite(v)) throw DataError("rank_by_feature: non-finite value");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return ids[a] < ids[b];
  });
  std::vector<int> ranks(values.size());
  for (std::size_t k = 0; k < order.size(); ++k) ranks[order[k]] = static_cast<int>(k + 1);
  return ranks;
}

inline std::vector<int> min_rank_combine(std::span<const int> r1, std::span<const int> r2, std::span<const int> r3) {
  if (r1.size() != r2.size() || r1.size() != r3.size()) throw DataError("min_rank_combine: length mismatch");
  std::vector<int> out(r1.size());
  for (std::size_t i = 0; i < r1.size(); ++i) out[i] = std::min({r1[i], r2[i], r3[i]});
  return out;
}

struct StackScore {
  std::uint64_t stack_id = 0;
  Label label = Label::healthy;
  int level = 0;
  double c_hat = 0.0;
  LesionFeatures perturbed;
  int r1 = 0, r2 = 0, r3 = 0;
  int score = 0;
};

/// One stack of an evaluation set. `pre` is needed only for pre-HVS estimation.
struct DecisionInput {
  const FeatureRow* post = nullptr;
  const FeatureRow* pre = nullptr;
};

inline double estimate_complexity(const DecisionInput& in, const HotellingModel* model, const DecisionConfig& cfg) {
  switch (cfg.mode) {
    case EstimationMode::none: return 0.0;
    case EstimationMode::ideal:
      return std::clamp(static_cast<double>(in.post->level) / kMaxComplexityLevel, 0.0, 1.0);
    case EstimationMode::pre_hvs:
    case EstimationMode::post_hvs: {
      if (model == nullptr) throw ConfigError(std::string("mode ") + to_string(cfg.mode) + " needs a complexity model");
      const FeatureRow* row = cfg.mode == EstimationMode::pre_hvs ? in.pre : in.post;
      if (row == nullptr) throw DataError("pre-HVS features missing for stack " + std::to_string(in.post->stack_id));
      const double c = normalized_complexity(*model, feature_vector(*row, model->feature_spec));
      return cfg.binary_complexity ? (c >= 0.5 ? 1.0 : 0.0) : c;
    }
  }
  return 0.0;
}

/// Perturbs, ranks jointly over the whole input set, and fuses by min rank.
inline std::vector<StackScore> decide_dataset(std::span<const DecisionInput> inputs, const HotellingModel* model,
                                              const DecisionConfig& cfg, const FeatureScale& scale,
                                              unsigned threads = 1) {
  cfg.validate();
  if (inputs.empty()) throw InsufficientDataError("decide_dataset: empty evaluation set");
  std::vector<StackScore> out(inputs.size());
  parallel_for(inputs.size(), threads, [&](std::size_t i) {
    const FeatureRow& row = *inputs[i].post;
    StackScore& s = out[i];
    s.stack_id = row.stack_id;
    s.label = row.label;
    s.level = row.level;
    s.c_hat = estimate_complexity(inputs[i], model, cfg);
    Engine rng = make_engine(cfg.master_seed, row.stack_id, cfg.rng_tag);
    s.perturbed = perturb_features(row.lesion, s.c_hat, cfg.kappa, scale, rng);
  });
  std::vector<std::uint64_t> ids(out.size());
  std::vector<double> v1(out.size()), v2(out.size()), v3(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    ids[i] = out[i].stack_id;
    v1[i] = out[i].perturbed.f1;
    v2[i] = out[i].perturbed.f2;
    v3[i] = out[i].perturbed.f3;
  }
  const auto r1 = rank_by_feature(v1, ids), r2 = rank_by_feature(v2, ids), r3 = rank_by_feature(v3, ids);
  const auto fused = min_rank_combine(r1, r2, r3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].r1 = r1[i];
    out[i].r2 = r2[i];
    out[i].r3 = r3[i];
    out[i].score = fused[i];
  }
  return out;
}

/// AUC of lesion over healthy min-rank scores.
inline RocResult score_roc(std::span<const StackScore> scores) {
  std::vector<double> pos, neg;
  for (const auto& s : scores) (s.label == Label::lesion ? pos : neg).push_back(s.score);
  return roc_result(pos, neg);
}

inline void write_scores_csv(std::ostream& out, std::span<const StackScore> scores) {
  out << "stack_id,label,level,c_hat,f1p,f2p,f3p,r1,r2,r3,score\n";
  out.precision(17);
  for (const auto& s : scores)
    out << s.stack_id << ',' << to_string(s.label) << ',' << s.level << ',' << s.c_hat << ',' << s.perturbed.f1
        << ',' << s.perturbed.f2 << ',' << s.perturbed.f3 << ',' << s.r1 << ',' << s.r2 << ',' << s.r3 << ','
        << s.score << '\n';
}

inline std::vector<StackScore> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("stack_id,label,level,c_hat", 0) != 0)
    throw DataError("unexpected scores CSV header");
  std::vector<StackScore> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 11) throw DataError("scores CSV row has wrong column count");
    StackScore s;
    try {
      s.stack_id = std::stoull(c[0]);
      s.label = label_from_string(c[1]);
      s.level = std::stoi(c[2]);
      s.c_hat = parse_double(c[3]);
      s.perturbed = {parse_double(c[4]), parse_double(c[5]), parse_double(c[6])};
      s.r1 = std::stoi(c[7]);
      s.r2 = std::stoi(c[8]);
      s.r3 = std::stoi(c[9]);
      s.score = std::stoi(c[10]);
    } catch (const std::logic_error&) {
      throw DataError("malformed scores CSV row: " + line);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace anthro
