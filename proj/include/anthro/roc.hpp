#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "anthro/core.hpp"

namespace anthro {

/// Wilcoxon / Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg).
/// Computed by sorting; the pair count is accumulated in integers (doubled to
/// hold the half credit for ties), so the result is exact.
inline double wilcoxon_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw InsufficientDataError("wilcoxon_auc: empty class");
  std::vector<std::pair<double, bool>> all;
  all.reserve(pos.size() + neg.size());
  for (double v : pos) all.emplace_back(v, true);
  for (double v : neg) all.emplace_back(v, false);
  for (const auto& [v, _] : all)
    if (std::isnan(v)) throw DataError("wilcoxon_auc: NaN score");
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::uint64_t twice_u = 0, neg_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, n = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? p : n) += 1;
      ++j;
    }
    twice_u += 2 * p * neg_below + p * n;
    neg_below += n;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Inverse error function on (-1, 1). A closed-form seed (Winitzki) refined by
/// Halley steps on erf; accurate to ~1e-15 away from the endpoints.
inline double erfinv(double y) {
  if (std::isnan(y) || y < -1.0 || y > 1.0) return std::numeric_limits<double>::quiet_NaN();
  if (y == 1.0) return std::numeric_limits<double>::infinity();
  if (y == -1.0) return -std::numeric_limits<double>::infinity();
  if (y == 0.0) return 0.0;
  constexpr double a = 0.147;
  constexpr double pi = 3.14159265358979323846;
  const double ln = std::log1p(-y * y);
  const double t = 2.0 / (pi * a) + 0.5 * ln;
  double x = std::copysign(std::sqrt(std::sqrt(t * t - ln / a) - t), y);
  const double two_over_sqrt_pi = 2.0 / std::sqrt(pi);
  for (int it = 0; it < 8; ++it) {
    const double err = std::erf(x) - y;
    const double deriv = two_over_sqrt_pi * std::exp(-x * x);
    if (deriv == 0.0) break;
    const double step = err / (deriv + x * err);  // Halley: f/(f' - f f''/(2f')), f''=-2x f'
    x -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

struct DPrime {
  double value = 0.0;
  bool saturated = false;  // AUC of exactly 0 or 1: value is +/- infinity
};

/// d' = 2 erfinv(2 AUC - 1).
inline DPrime dprime(double auc) {
  if (std::isnan(auc) || auc < 0.0 || auc > 1.0) throw DataError("dprime: AUC outside [0, 1]");
  if (auc == 1.0) return {std::numeric_limits<double>::infinity(), true};
  if (auc == 0.0) return {-std::numeric_limits<double>::infinity(), true};
  return {2.0 * erfinv(2.0 * auc - 1.0), false};
}

struct RocResult {
  double auc = 0.5;
  DPrime dprime;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::optional<double> ci_halfwidth;  // twice the std over estimator instances
};

inline RocResult roc_result(std::span<const double> pos, std::span<const double> neg) {
  RocResult r;
  r.auc = wilcoxon_auc(pos, neg);
  r.dprime = dprime(r.auc);
  r.n_pos = pos.size();
  r.n_neg = neg.size();
  return r;
}

/// Mean AUC over estimator instances with a +/- 2 std interval (sample std).
inline RocResult summarize_instances(std::span<const double> aucs, std::size_t n_pos, std::size_t n_neg) {
  if (aucs.empty()) throw InsufficientDataError("no estimator instances");
  RocResult r;
  r.n_pos = n_pos;
  r.n_neg = n_neg;
  // Deviations from the first instance keep identical instances exact.
  const double a0 = aucs.front();
  double shift = 0.0;
  for (double a : aucs) shift += a - a0;
  shift /= static_cast<double>(aucs.size());
  r.auc = a0 + shift;
  double ss = 0.0;
  for (double a : aucs) ss += (a - a0 - shift) * (a - a0 - shift);
  r.ci_halfwidth = aucs.size() > 1 ? 2.0 * std::sqrt(ss / static_cast<double>(aucs.size() - 1)) : 0.0;
  r.dprime = dprime(std::clamp(r.auc, 0.0, 1.0));
  return r;
}

/// Affine map of [lo, hi] onto the [0, 3] reader-score axis.
inline std::vector<double> scale_scores(std::span<const double> scores, double lo, double hi) {
  if (!(hi > lo)) throw DataError("score range is degenerate");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = 3.0 * (scores[i] - lo) / (hi - lo);
  return out;
}

/// Counts per bin after scaling [lo, hi] to [0, 3]; the top edge falls in the
/// last bin.
inline std::vector<std::size_t> score_histogram(std::span<const double> scores, int n_bins, double lo,
                                                double hi) {
  if (n_bins < 2) throw DataError("score_histogram needs at least 2 bins");
  const auto scaled = scale_scores(scores, lo, hi);
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
  const double eps = 1e-12;
  for (double s : scaled) {
    if (!(s >= -eps && s <= 3.0 + eps)) throw DataError("score outside histogram range");
    int bin = static_cast<int>(std::floor(s / 3.0 * n_bins));
    counts[static_cast<std::size_t>(std::clamp(bin, 0, n_bins - 1))] += 1;
  }
  return counts;
}

}  // namespace anthro
