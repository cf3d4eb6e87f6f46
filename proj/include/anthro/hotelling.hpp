#pragma once

// Hotelling discriminant used to estimate background complexity from a feature
// set, and to measure the power of a feature set for a two-class task.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "anthro/core.hpp"
#include "anthro/linalg.hpp"
#include "anthro/roc.hpp"
#include "anthro/stack.hpp"

namespace anthro {

struct HotellingModel {
  std::vector<double> w;
  std::vector<double> mu0;
  std::vector<double> mu1;
  double ridge = 0.0;
  double calib_lo = 0.0;  // median training score, class 0
  double calib_hi = 1.0;  // median training score, class 1
  std::vector<std::string> feature_spec;

  std::size_t size() const { return w.size(); }
};

inline double score(const HotellingModel& m, std::span<const double> f) {
  if (f.size() != m.w.size()) throw DataError("score: feature length does not match model");
  return dot(m.w, f);
}

inline std::vector<double> scores(const HotellingModel& m, const Matrix& f) {
  std::vector<double> out(f.rows());
  for (std::size_t r = 0; r < f.rows(); ++r) out[r] = score(m, f.row(r));
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw InsufficientDataError("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// w = (S0 + S1 + lambda I)^-1 (mu1 - mu0), lambda = 1e-6 trace(S0 + S1) / n.
/// A single feature gets w = 1. Calibration anchors are the class medians of
/// the training scores.
inline HotellingModel train_hotelling(const Matrix& f0, const Matrix& f1,
                                      std::vector<std::string> feature_spec = {}) {
  if (f0.rows() < 2 || f1.rows() < 2) throw InsufficientDataError("hotelling needs >= 2 samples per class");
  const std::size_t n = f0.cols();
  if (n == 0 || f1.cols() != n) throw DataError("hotelling: feature dimension mismatch");
  for (const Matrix* m : {&f0, &f1})
    for (std::size_t r = 0; r < m->rows(); ++r)
      if (!all_finite(m->row(r))) throw DataError("hotelling: non-finite feature value");

  HotellingModel model;
  model.mu0 = column_means(f0);
  model.mu1 = column_means(f1);
  if (n == 1) {
    model.w = {1.0};
  } else {
    Matrix pooled = covariance(f0);
    const Matrix c1 = covariance(f1);
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) pooled(i, j) += c1(i, j);
      trace += pooled(i, i);
    }
    model.ridge = 1e-6 * trace / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) pooled(i, i) += model.ridge;
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = model.mu1[i] - model.mu0[i];
    model.w = cholesky_solve(std::move(pooled), diff);
  }
  if (feature_spec.empty())
    for (std::size_t i = 0; i < n; ++i) feature_spec.push_back("x" + std::to_string(i + 1));
  if (feature_spec.size() != n) throw DataError("feature_spec length does not match features");
  model.feature_spec = std::move(feature_spec);
  model.calib_lo = median(scores(model, f0));
  model.calib_hi = median(scores(model, f1));
  return model;
}

struct FeaturePower {
  double raw_auc = 0.5;
  double power = 0.5;  // max(AUC, 1 - AUC)
  bool swapped = false;
  DPrime dprime;
};

/// Power of a discriminant: AUC of class-1 over class-0 scores, with the
/// classes swapped when that AUC falls below chance.
inline FeaturePower feature_power(std::span<const double> scores0, std::span<const double> scores1) {
  FeaturePower p;
  p.raw_auc = wilcoxon_auc(scores1, scores0);
  p.swapped = p.raw_auc < 0.5;
  p.power = p.swapped ? 1.0 - p.raw_auc : p.raw_auc;
  p.dprime = dprime(p.power);
  return p;
}

/// Indices (0-based, ascending) of the k weights with the largest magnitude;
/// equal magnitudes prefer the lower index.
inline std::vector<std::size_t> select_top_k(const HotellingModel& m, std::size_t k) {
  if (k < 1 || k > m.w.size()) throw DataError("select_top_k: k out of range");
  std::vector<std::size_t> idx(m.w.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(m.w[a]) > std::abs(m.w[b]); });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Complexity on [0, 1]: the training-median anchors map to 0 and 1, clamped.
inline double normalized_complexity(const HotellingModel& m, std::span<const double> f) {
  if (m.calib_hi == m.calib_lo) throw DataError("degenerate calibration: calib_lo == calib_hi");
  const double c = (score(m, f) - m.calib_lo) / (m.calib_hi - m.calib_lo);
  return std::clamp(c, 0.0, 1.0);
}

struct CoefficientRow {
  std::size_t index = 0;  // 1-based feature position
  std::string name;
  double weight = 0.0;
};

inline std::vector<CoefficientRow> export_coefficients(const HotellingModel& m) {
  std::vector<CoefficientRow> rows;
  for (std::size_t i = 0; i < m.w.size(); ++i)
    rows.push_back({i + 1, i < m.feature_spec.size() ? m.feature_spec[i] : "", m.w[i]});
  return rows;
}

inline void write_coefficients_csv(std::ostream& out, const std::vector<CoefficientRow>& rows) {
  out << "index,feature,weight\n";
  out.precision(17);
  for (const auto& r : rows) out << r.index << ',' << r.name << ',' << r.weight << '\n';
}

inline std::vector<CoefficientRow> read_coefficients_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "index,feature,weight") throw DataError("coefficients: bad header");
  std::vector<CoefficientRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) throw DataError("coefficients: malformed row '" + line + "'");
    try {
      rows.push_back({std::stoul(line.substr(0, a)), line.substr(a + 1, b - a - 1), std::stod(line.substr(b + 1))});
    } catch (const std::logic_error&) {
      throw DataError("coefficients: malformed row '" + line + "'");
    }
  }
  return rows;
}

inline nlohmann::json to_json(const HotellingModel& m) {
  return {{"w", m.w},   {"mu0", m.mu0},           {"mu1", m.mu1},
          {"ridge", m.ridge}, {"calib_lo", m.calib_lo}, {"calib_hi", m.calib_hi},
          {"feature_spec", m.feature_spec}};
}

inline HotellingModel hotelling_from_json(const nlohmann::json& j) {
  HotellingModel m;
  try {
    m.w = j.at("w").get<std::vector<double>>();
    m.mu0 = j.at("mu0").get<std::vector<double>>();
    m.mu1 = j.at("mu1").get<std::vector<double>>();
    m.ridge = j.at("ridge").get<double>();
    m.calib_lo = j.at("calib_lo").get<double>();
    m.calib_hi = j.at("calib_hi").get<double>();
    m.feature_spec = j.at("feature_spec").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
  if (m.w.empty() || m.mu0.size() != m.w.size() || m.mu1.size() != m.w.size())
    throw DataError("model vectors have inconsistent lengths");
  return m;
}

}  // namespace anthro
