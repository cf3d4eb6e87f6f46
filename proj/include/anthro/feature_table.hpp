#pragma once

// Per-stack feature rows, named feature selections, and the features CSV.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "anthro/core.hpp"
#include "anthro/features.hpp"
#include "anthro/hvs.hpp"
#include "anthro/linalg.hpp"
#include "anthro/stackgen.hpp"

namespace anthro {

struct FeatureRow {
  std::uint64_t stack_id = 0;
  Label label = Label::healthy;
  int level = 0;
  LesionFeatures lesion;
  ComplexityFeatures complexity;
};

enum class Stage { pre_hvs, post_hvs };

inline const char* to_string(Stage s) { return s == Stage::pre_hvs ? "pre-hvs" : "post-hvs"; }

inline Stage stage_from_string(const std::string& s) {
  if (s == "pre-hvs" || s == "pre_hvs" || s == "before") return Stage::pre_hvs;
  if (s == "post-hvs" || s == "post_hvs" || s == "after") return Stage::post_hvs;
  throw ConfigError("unknown stage '" + s + "' (expected pre-hvs or post-hvs)");
}

/// The stack a given stage sees, in display units: the normalized raw stack
/// (pre-HVS) or the normalized band-pass response (post-HVS).
inline Stack stage_view(const Stack& raw, Stage stage, const HvsConfig& hvs) {
  Stack pre = normalized(raw);
  if (stage == Stage::pre_hvs) return pre;
  Stack post = normalized(apply_hvs(pre, hvs));
  post.post_hvs = true;
  return post;
}

inline FeatureRow extract_features(const Stack& view, bool with_ssim = true) {
  FeatureRow row;
  row.stack_id = view.stack_id;
  row.label = view.label;
  row.level = view.complexity_level;
  row.lesion = compute_lesion_features(view);
  row.complexity = compute_complexity_features(view, with_ssim);
  return row;
}

/// Value of a named feature: f1, f2, f3, b1, b2, b3_<i>, b4_<i> (i 1-based).
inline double feature_value(const FeatureRow& row, const std::string& name) {
  if (name == "f1") return row.lesion.f1;
  if (name == "f2") return row.lesion.f2;
  if (name == "f3") return row.lesion.f3;
  if (name == "b1") return row.complexity.b1;
  if (name == "b2") return row.complexity.b2;
  if (name.size() > 3 && (name.rfind("b3_", 0) == 0 || name.rfind("b4_", 0) == 0)) {
    std::size_t idx = 0;
    const auto* first = name.data() + 3;
    const auto* last = name.data() + name.size();
    auto [ptr, ec] = std::from_chars(first, last, idx);
    if (ec != std::errc() || ptr != last || idx == 0) throw DataError("bad feature name '" + name + "'");
    const auto& v = name[1] == '3' ? row.complexity.b3 : row.complexity.b4;
    if (idx > v.size()) throw DataError("feature '" + name + "' not available in row");
    return v[idx - 1];
  }
  throw DataError("unknown feature '" + name + "'");
}

/// Expands a feature-set name: "f" (f1..f3), "b1", "b2", "b3", "b4" (all slice
/// pairs), "b3:2,3,27" (listed pairs), or a single name like "b3_5".
inline std::vector<std::string> feature_names(const std::string& set, int pairs) {
  std::vector<std::string> out;
  if (set == "f" || set == "f1-f3") return {"f1", "f2", "f3"};
  if (set == "b1" || set == "b2" || set == "f1" || set == "f2" || set == "f3") return {set};
  if (set == "b3" || set == "b4") {
    for (int i = 1; i <= pairs; ++i) out.push_back(set + "_" + std::to_string(i));
    return out;
  }
  if (set.size() > 3 && (set.rfind("b3:", 0) == 0 || set.rfind("b4:", 0) == 0)) {
    std::stringstream ss(set.substr(3));
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(set.substr(0, 2) + "_" + tok);
    return out;
  }
  if (set.rfind("b3_", 0) == 0 || set.rfind("b4_", 0) == 0) return {set};
  throw ConfigError("unknown feature set '" + set + "'");
}

inline std::vector<double> feature_vector(const FeatureRow& row, const std::vector<std::string>& names) {
  std::vector<double> v;
  v.reserve(names.size());
  for (const auto& n : names) v.push_back(feature_value(row, n));
  return v;
}

template <typename Pred>
Matrix feature_matrix(const std::vector<FeatureRow>& rows, const std::vector<std::string>& names, Pred&& keep) {
  Matrix m;
  for (const auto& r : rows)
    if (keep(r)) m.append_row(feature_vector(r, names));
  if (m.rows() == 0) return Matrix(0, names.size());
  return m;
}

// CSV ------------------------------------------------------------------------

inline void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
  const std::size_t pairs = rows.empty() ? 31 : rows.front().complexity.b3.size();
  out << "stack_id,label,level,f1,f2,f3,b1,b2";
  for (std::size_t i = 1; i <= pairs; ++i) out << ",b3_" << i;
  for (std::size_t i = 1; i <= pairs; ++i) out << ",b4_" << i;
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << r.stack_id << ',' << to_string(r.label) << ',' << r.level << ',' << r.lesion.f1 << ','
        << r.lesion.f2 << ',' << r.lesion.f3 << ',' << r.complexity.b1 << ',' << r.complexity.b2;
    for (std::size_t i = 0; i < pairs; ++i) out << ',' << r.complexity.b3.at(i);
    for (std::size_t i = 0; i < pairs; ++i)
      out << ',' << (i < r.complexity.b4.size() ? r.complexity.b4[i] : std::numeric_limits<double>::quiet_NaN());
    out << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw DataError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw DataError("bad number '" + s + "'");
  }
}

inline std::vector<FeatureRow> read_features_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("features CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 8 || header[0] != "stack_id" || (header.size() - 8) % 2 != 0)
    throw DataError("unexpected features CSV header");
  const std::size_t pairs = (header.size() - 8) / 2;
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("features CSV row has wrong column count");
    FeatureRow r;
    r.stack_id = std::stoull(cells[0]);
    r.label = label_from_string(cells[1]);
    r.level = std::stoi(cells[2]);
    r.lesion = {parse_double(cells[3]), parse_double(cells[4]), parse_double(cells[5])};
    r.complexity.b1 = parse_double(cells[6]);
    r.complexity.b2 = parse_double(cells[7]);
    for (std::size_t i = 0; i < pairs; ++i) r.complexity.b3.push_back(parse_double(cells[8 + i]));
    bool have_b4 = false;
    std::vector<double> b4;
    for (std::size_t i = 0; i < pairs; ++i) {
      b4.push_back(parse_double(cells[8 + pairs + i]));
      have_b4 = have_b4 || !std::isnan(b4.back());
    }
    if (have_b4) r.complexity.b4 = std::move(b4);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<FeatureRow> read_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return read_features_csv(in);
}

}  // namespace anthro
