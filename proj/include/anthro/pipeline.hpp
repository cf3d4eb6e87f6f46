#pragma once

// End-to-end experiment: dataset, features, complexity-power table, detection
// table with grouped confidence intervals, d' drops and score histograms.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "anthro/core.hpp"
#include "anthro/decision.hpp"
#include "anthro/feature_table.hpp"
#include "anthro/hotelling.hpp"
#include "anthro/hvs.hpp"
#include "anthro/roc.hpp"
#include "anthro/stack_io.hpp"
#include "anthro/stackgen.hpp"

namespace anthro {

struct ExperimentConfig {
  std::uint64_t master_seed = 20150221;
  unsigned threads = 0;  // 0: hardware concurrency
  GenConfig gen;
  HvsConfig hvs;
  DecisionConfig decision;
  int n_per_cell = 100;
  std::vector<int> levels{0, 4};
  std::size_t top_k = 5;
  int groups = 4;
  bool rotate_folds = true;  // every group takes a turn as the held-out group
  int histogram_bins = 4;
  std::string output_dir = "report";
  std::optional<std::string> dataset_dir;  // reuse stacks written by `generate`

  /// Copies master_seed into the sub-configs that draw random numbers.
  void propagate_seed() {
    gen.master_seed = master_seed;
    decision.master_seed = master_seed;
  }

  unsigned worker_count() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }

  std::vector<int> sorted_levels() const {
    std::set<int> s(levels.begin(), levels.end());
    return {s.begin(), s.end()};
  }

  void validate() const {
    gen.validate();
    hvs.validate();
    decision.validate();
    const auto lv = sorted_levels();
    if (lv.size() < 2) throw ConfigError("at least two complexity levels are required");
    if (lv.front() < 0 || lv.back() > kMaxComplexityLevel) throw ConfigError("complexity level must be in 0..4");
    if (groups < 2) throw ConfigError("groups must be >= 2");
    if (n_per_cell < 2 * groups) throw ConfigError("n_per_cell must give >= 2 stacks per class per group");
    if (top_k < 1 || top_k > static_cast<std::size_t>(gen.dims.slices - 1))
      throw ConfigError("top_k must be in 1..slices-1");
    if (histogram_bins < 2) throw ConfigError("histogram_bins must be >= 2");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  }
};

inline nlohmann::json to_json(const HvsConfig& h) {
  return {{"center_sigma", h.center_sigma},
          {"surround_sigma", h.surround_sigma},
          {"temporal_sigma", h.temporal_sigma},
          {"enabled", h.enabled}};
}

inline nlohmann::json to_json(const DecisionConfig& d) {
  return {{"kappa", d.kappa},
          {"estimation_mode", to_string(d.mode)},
          {"binary_complexity", d.binary_complexity},
          {"rng_tag", d.rng_tag}};
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j{{"master_seed", c.master_seed},
                   {"threads", c.threads},
                   {"gen", to_json(c.gen)},
                   {"hvs", to_json(c.hvs)},
                   {"decision", to_json(c.decision)},
                   {"dataset", {{"n_per_cell", c.n_per_cell}, {"levels", c.sorted_levels()}}},
                   {"power", {{"top_k", c.top_k}}},
                   {"detection",
                    {{"groups", c.groups}, {"rotate_folds", c.rotate_folds}, {"histogram_bins", c.histogram_bins}}},
                   {"output_dir", c.output_dir}};
  if (c.dataset_dir) j["dataset_dir"] = *c.dataset_dir;
  return j;
}

/// Reads a config; absent keys keep their defaults. master_seed overrides the
/// seeds of the sub-configs.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    c.master_seed = j.value("master_seed", c.master_seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("gen")) c.gen = gen_config_from_json(j.at("gen"));
    if (j.contains("hvs")) {
      const auto& h = j.at("hvs");
      c.hvs.center_sigma = h.value("center_sigma", c.hvs.center_sigma);
      c.hvs.surround_sigma = h.value("surround_sigma", c.hvs.surround_sigma);
      c.hvs.temporal_sigma = h.value("temporal_sigma", c.hvs.temporal_sigma);
      c.hvs.enabled = h.value("enabled", c.hvs.enabled);
    }
    if (j.contains("decision")) {
      const auto& d = j.at("decision");
      c.decision.kappa = d.value("kappa", c.decision.kappa);
      if (d.contains("estimation_mode"))
        c.decision.mode = estimation_mode_from_string(d.at("estimation_mode").get<std::string>());
      c.decision.binary_complexity = d.value("binary_complexity", c.decision.binary_complexity);
      c.decision.rng_tag = d.value("rng_tag", c.decision.rng_tag);
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.n_per_cell = d.value("n_per_cell", c.n_per_cell);
      c.levels = d.value("levels", c.levels);
    }
    if (j.contains("power")) c.top_k = j.at("power").value("top_k", c.top_k);
    if (j.contains("detection")) {
      const auto& d = j.at("detection");
      c.groups = d.value("groups", c.groups);
      c.rotate_folds = d.value("rotate_folds", c.rotate_folds);
      c.histogram_bins = d.value("histogram_bins", c.histogram_bins);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.propagate_seed();
  c.validate();
  return c;
}

// Dataset features -------------------------------------------------------------

struct DatasetFeatures {
  std::vector<FeatureRow> post;  // after the HVS stage
  std::vector<FeatureRow> pre;   // same stacks, before the HVS stage
  std::vector<int> group;        // held-out group of each stack
};

/// Group of each layout entry: stacks are dealt round-robin within each
/// (level, label) cell so every group is balanced.
inline std::vector<int> assign_groups(const std::vector<FeatureRow>& rows, int groups) {
  std::map<std::pair<int, int>, int> seen;
  std::vector<int> g(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int& k = seen[{rows[i].level, static_cast<int>(rows[i].label)}];
    g[i] = k++ % groups;
  }
  return g;
}

inline DatasetFeatures compute_dataset_features(const ExperimentConfig& cfg) {
  const unsigned threads = cfg.worker_count();
  std::vector<DatasetEntry> layout = dataset_layout(cfg.n_per_cell, cfg.levels);
  std::optional<nlohmann::json> manifest;
  if (cfg.dataset_dir) {
    manifest = read_json_file(std::filesystem::path(*cfg.dataset_dir) / "manifest.json");
    if (manifest->at("gen") != to_json(cfg.gen))
      throw ConfigError("cached dataset in " + *cfg.dataset_dir + " was generated with a different config");
    const auto& stacks = manifest->at("stacks");
    layout.clear();
    for (const auto& s : stacks)
      layout.push_back({s.at("stack_id").get<std::uint64_t>(), label_from_string(s.at("label").get<std::string>()),
                        s.at("complexity_level").get<int>()});
  }
  DatasetFeatures out;
  out.post.resize(layout.size());
  out.pre.resize(layout.size());
  parallel_for(layout.size(), threads, [&](std::size_t i) {
    const auto& e = layout[i];
    const Stack raw = manifest ? load_stack(*cfg.dataset_dir, manifest->at("stacks").at(i))
                               : synthesize_stack(cfg.gen, e.stack_id, e.label, e.level);
    out.pre[i] = extract_features(stage_view(raw, Stage::pre_hvs, cfg.hvs));
    out.post[i] = extract_features(stage_view(raw, Stage::post_hvs, cfg.hvs));
  });
  out.group = assign_groups(out.post, cfg.groups);
  return out;
}

// Power table ------------------------------------------------------------------

struct PowerRow {
  std::string name;
  std::string stage;  // pre-hvs or post-hvs
  std::string task;   // complexity or lesion
  std::vector<std::string> features;
  FeaturePower pooled;               // trained and tested on all stacks
  std::optional<double> heldout;     // trained on half the groups, tested on the rest
};

struct PowerTable {
  std::vector<PowerRow> rows;
  HotellingModel b3_model;                 // complexity model on all post-HVS b3
  std::vector<std::size_t> top_k_indices;  // 0-based slice-pair indices of b3'
};

namespace detail {

enum class Task { complexity, lesion };

// Class of a row for a task, or -1 when the row takes no part.
inline int task_class(const FeatureRow& r, Task task, int lo_level, int hi_level) {
  if (task == Task::lesion) return r.label == Label::lesion ? 1 : 0;
  if (r.level == lo_level) return 0;
  if (r.level == hi_level) return 1;
  return -1;
}

inline PowerRow measure_power(const std::vector<FeatureRow>& rows, const std::vector<int>& group, int groups,
                              const std::string& name, Stage stage, Task task,
                              const std::vector<std::string>& names, int lo_level, int hi_level) {
  auto take = [&](int cls, int parity) {
    Matrix m;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (task_class(rows[i], task, lo_level, hi_level) != cls) continue;
      if (parity >= 0 && (group[i] < groups / 2) != (parity == 0)) continue;
      m.append_row(feature_vector(rows[i], names));
    }
    return m;
  };
  PowerRow row;
  row.name = name;
  row.stage = to_string(stage);
  row.task = task == Task::lesion ? "lesion" : "complexity";
  row.features = names;
  const Matrix f0 = take(0, -1), f1 = take(1, -1);
  const HotellingModel m = train_hotelling(f0, f1, names);
  row.pooled = feature_power(scores(m, f0), scores(m, f1));
  const HotellingModel half = train_hotelling(take(0, 0), take(1, 0), names);
  const double a = wilcoxon_auc(scores(half, take(1, 1)), scores(half, take(0, 1)));
  row.heldout = row.pooled.swapped ? 1.0 - a : a;
  return row;
}

}  // namespace detail

inline PowerTable run_power_table(const ExperimentConfig& cfg, const DatasetFeatures& data) {
  const auto lv = cfg.sorted_levels();
  const int lo = lv.front(), hi = lv.back();
  const int pairs = cfg.gen.dims.slices - 1;
  using detail::Task;
  auto row = [&](const std::vector<FeatureRow>& rows, const std::string& name, Stage stage, Task task,
                 const std::vector<std::string>& names) {
    return detail::measure_power(rows, data.group, cfg.groups, name, stage, task, names, lo, hi);
  };
  PowerTable t;
  for (const char* set : {"f", "b1", "b2", "b3", "b4"})
    t.rows.push_back(row(data.post, set, Stage::post_hvs, Task::complexity, feature_names(set, pairs)));
  t.rows.push_back(row(data.pre, "b3", Stage::pre_hvs, Task::complexity, feature_names("b3", pairs)));

  const auto b3 = feature_names("b3", pairs);
  t.b3_model = train_hotelling(
      feature_matrix(data.post, b3, [&](const FeatureRow& r) { return r.level == lo; }),
      feature_matrix(data.post, b3, [&](const FeatureRow& r) { return r.level == hi; }), b3);
  t.top_k_indices = select_top_k(t.b3_model, cfg.top_k);
  std::vector<std::string> reduced;
  std::string reduced_name = "b3:";
  for (std::size_t k = 0; k < t.top_k_indices.size(); ++k) {
    reduced.push_back(b3[t.top_k_indices[k]]);
    reduced_name += (k ? "," : "") + std::to_string(t.top_k_indices[k] + 1);
  }
  t.rows.push_back(row(data.post, reduced_name, Stage::post_hvs, Task::complexity, reduced));

  for (const char* set : {"b3", "b4"})
    t.rows.push_back(row(data.post, set, Stage::post_hvs, Task::lesion, feature_names(set, pairs)));
  return t;
}

inline const PowerRow& find_power_row(const PowerTable& t, const std::string& name, const std::string& stage,
                                      const std::string& task) {
  for (const auto& r : t.rows)
    if (r.name == name && r.stage == stage && r.task == task) return r;
  throw DataError("power table has no row " + name + "/" + stage + "/" + task);
}

// Detection table --------------------------------------------------------------

struct DetectionCell {
  int level = 0;
  EstimationMode mode = EstimationMode::none;
  RocResult roc;                       // mean over folds; ci only for estimator modes
  std::vector<double> fold_aucs;       // per held-out group, mean over instances
  std::vector<std::size_t> hist_healthy;
  std::vector<std::size_t> hist_lesion;
  double mean_scaled_healthy = 0.0;
  double mean_scaled_lesion = 0.0;
};

struct DprimeDrop {
  EstimationMode mode = EstimationMode::none;
  DPrime simple;
  DPrime complex;
  double auc_drop = 0.0;
  double percent_drop = 0.0;  // of the simple-background d'
};

struct DetectionTable {
  std::vector<DetectionCell> cells;
  std::vector<DprimeDrop> drops;  // lowest vs highest level, per mode
  FeatureScale scale{};           // noise unit of the last fold (informational)

  const DetectionCell& cell(int level, EstimationMode mode) const {
    for (const auto& c : cells)
      if (c.level == level && c.mode == mode) return c;
    throw DataError("detection table has no cell for level " + std::to_string(level));
  }
  const DprimeDrop& drop(EstimationMode mode) const {
    for (const auto& d : drops)
      if (d.mode == mode) return d;
    throw DataError("detection table has no drop row");
  }
};

inline constexpr EstimationMode kAllModes[] = {EstimationMode::post_hvs, EstimationMode::pre_hvs,
                                               EstimationMode::ideal, EstimationMode::none};

/// Mean AUC of several estimator instances evaluated on the same held-out set,
/// with the +/- 2 std interval.
inline RocResult grouped_ci(std::span<const double> instance_aucs, std::size_t n_pos, std::size_t n_neg) {
  if (instance_aucs.empty()) throw InsufficientDataError("grouped_ci: no instances");
  return summarize_instances(instance_aucs, n_pos, n_neg);
}

inline DetectionTable run_detection_table(const ExperimentConfig& cfg, const DatasetFeatures& data) {
  const auto lv = cfg.sorted_levels();
  const int lo = lv.front(), hi = lv.back();
  const int pairs = cfg.gen.dims.slices - 1;
  const auto b3 = feature_names("b3", pairs);
  const unsigned threads = cfg.worker_count();

  std::vector<int> held_out;
  if (cfg.rotate_folds)
    for (int g = 0; g < cfg.groups; ++g) held_out.push_back(g);
  else
    held_out.push_back(cfg.groups - 1);

  struct Accum {
    std::vector<double> fold_aucs, fold_ci;
    std::size_t n_pos = 0, n_neg = 0;
    std::vector<std::size_t> hist_h, hist_l;
    double sum_h = 0, sum_l = 0;
    std::size_t cnt_h = 0, cnt_l = 0;
  };
  std::map<std::pair<int, int>, Accum> acc;
  DetectionTable table;

  for (int h : held_out) {
    std::vector<LesionFeatures> simple;
    for (std::size_t i = 0; i < data.post.size(); ++i)
      if (data.group[i] != h && data.post[i].level == lo) simple.push_back(data.post[i].lesion);
    table.scale = feature_scale(simple);

    // One estimator per training group and stage.
    std::map<std::pair<int, int>, HotellingModel> estimators;
    for (int g = 0; g < cfg.groups; ++g) {
      if (g == h) continue;
      for (Stage stage : {Stage::post_hvs, Stage::pre_hvs}) {
        const auto& rows = stage == Stage::post_hvs ? data.post : data.pre;
        Matrix f0, f1;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (data.group[i] != g) continue;
          if (rows[i].level == lo) f0.append_row(feature_vector(rows[i], b3));
          if (rows[i].level == hi) f1.append_row(feature_vector(rows[i], b3));
        }
        estimators.emplace(std::make_pair(g, static_cast<int>(stage)), train_hotelling(f0, f1, b3));
      }
    }

    for (int level : lv) {
      std::vector<DecisionInput> inputs;
      for (std::size_t i = 0; i < data.post.size(); ++i)
        if (data.group[i] == h && data.post[i].level == level) inputs.push_back({&data.post[i], &data.pre[i]});
      for (EstimationMode mode : kAllModes) {
        DecisionConfig dc = cfg.decision;
        dc.mode = mode;
        std::vector<const HotellingModel*> instances;
        if (mode == EstimationMode::pre_hvs || mode == EstimationMode::post_hvs) {
          const Stage stage = mode == EstimationMode::pre_hvs ? Stage::pre_hvs : Stage::post_hvs;
          for (const auto& [key, model] : estimators)
            if (key.second == static_cast<int>(stage)) instances.push_back(&model);
        } else {
          instances.push_back(nullptr);
        }
        Accum& a = acc[{level, static_cast<int>(mode)}];
        if (a.hist_h.empty()) {
          a.hist_h.assign(cfg.histogram_bins, 0);
          a.hist_l.assign(cfg.histogram_bins, 0);
        }
        std::vector<double> aucs;
        for (const HotellingModel* model : instances) {
          const auto scored = decide_dataset(inputs, model, dc, table.scale, threads);
          const RocResult r = score_roc(scored);
          aucs.push_back(r.auc);
          a.n_pos = r.n_pos;
          a.n_neg = r.n_neg;
          std::vector<double> sh, sl;
          for (const auto& s : scored) (s.label == Label::lesion ? sl : sh).push_back(s.score);
          const double top = static_cast<double>(scored.size());
          const auto hh = score_histogram(sh, cfg.histogram_bins, 1.0, top);
          const auto hl = score_histogram(sl, cfg.histogram_bins, 1.0, top);
          for (int b = 0; b < cfg.histogram_bins; ++b) {
            a.hist_h[b] += hh[b];
            a.hist_l[b] += hl[b];
          }
          for (double v : scale_scores(sh, 1.0, top)) a.sum_h += v;
          for (double v : scale_scores(sl, 1.0, top)) a.sum_l += v;
          a.cnt_h += sh.size();
          a.cnt_l += sl.size();
        }
        const RocResult fold = grouped_ci(aucs, a.n_pos, a.n_neg);
        a.fold_aucs.push_back(fold.auc);
        a.fold_ci.push_back(fold.ci_halfwidth.value_or(0.0));
      }
    }
  }

  for (int level : lv)
    for (EstimationMode mode : kAllModes) {
      const Accum& a = acc.at({level, static_cast<int>(mode)});
      DetectionCell c;
      c.level = level;
      c.mode = mode;
      c.fold_aucs = a.fold_aucs;
      c.roc.n_pos = a.n_pos;
      c.roc.n_neg = a.n_neg;
      c.roc.auc = std::accumulate(a.fold_aucs.begin(), a.fold_aucs.end(), 0.0) / a.fold_aucs.size();
      c.roc.dprime = dprime(c.roc.auc);
      if (mode == EstimationMode::pre_hvs || mode == EstimationMode::post_hvs)
        c.roc.ci_halfwidth = std::accumulate(a.fold_ci.begin(), a.fold_ci.end(), 0.0) / a.fold_ci.size();
      c.hist_healthy = a.hist_h;
      c.hist_lesion = a.hist_l;
      c.mean_scaled_healthy = a.sum_h / static_cast<double>(a.cnt_h);
      c.mean_scaled_lesion = a.sum_l / static_cast<double>(a.cnt_l);
      table.cells.push_back(std::move(c));
    }

  for (EstimationMode mode : kAllModes) {
    DprimeDrop d;
    d.mode = mode;
    const auto& s = table.cell(lo, mode);
    const auto& c = table.cell(hi, mode);
    d.simple = s.roc.dprime;
    d.complex = c.roc.dprime;
    d.auc_drop = s.roc.auc - c.roc.auc;
    d.percent_drop = 100.0 * (d.simple.value - d.complex.value) / d.simple.value;
    table.drops.push_back(d);
  }
  return table;
}

// Report -----------------------------------------------------------------------

namespace detail {

inline nlohmann::json dprime_json(const DPrime& d) {
  if (d.saturated) return {{"value", d.value > 0 ? "inf" : "-inf"}, {"saturated", true}};
  return {{"value", d.value}, {"saturated", false}};
}

}  // namespace detail

inline nlohmann::json report_json(const ExperimentConfig& cfg, const DatasetFeatures& data, const PowerTable& pt,
                                  const DetectionTable& dt) {
  using nlohmann::json;
  json power = json::array();
  for (const auto& r : pt.rows)
    power.push_back({{"feature_set", r.name},
                     {"stage", r.stage},
                     {"task", r.task},
                     {"n_features", r.features.size()},
                     {"auc", r.pooled.power},
                     {"raw_auc", r.pooled.raw_auc},
                     {"swapped", r.pooled.swapped},
                     {"dprime", detail::dprime_json(r.pooled.dprime)},
                     {"heldout_auc", r.heldout ? json(*r.heldout) : json(nullptr)}});
  std::vector<std::size_t> top;
  for (auto i : pt.top_k_indices) top.push_back(i + 1);

  json cells = json::array();
  for (const auto& c : dt.cells) {
    json cell{{"level", c.level},
              {"mode", to_string(c.mode)},
              {"auc", c.roc.auc},
              {"dprime", detail::dprime_json(c.roc.dprime)},
              {"n_pos", c.roc.n_pos},
              {"n_neg", c.roc.n_neg},
              {"fold_aucs", c.fold_aucs},
              {"histogram", {{"healthy", c.hist_healthy}, {"lesion", c.hist_lesion}}},
              {"mean_scaled_score", {{"healthy", c.mean_scaled_healthy}, {"lesion", c.mean_scaled_lesion}}}};
    cell["ci_halfwidth"] = c.roc.ci_halfwidth ? json(*c.roc.ci_halfwidth) : json(nullptr);
    cells.push_back(std::move(cell));
  }
  json drops = json::array();
  for (const auto& d : dt.drops)
    drops.push_back({{"mode", to_string(d.mode)},
                     {"dprime_simple", detail::dprime_json(d.simple)},
                     {"dprime_complex", detail::dprime_json(d.complex)},
                     {"auc_drop", d.auc_drop},
                     {"percent_dprime_drop", d.percent_drop}});
  json cfg_echo = to_json(cfg);
  cfg_echo.erase("threads");
  cfg_echo.erase("output_dir");
  return {{"config", cfg_echo},
          {"n_stacks", data.post.size()},
          {"power_table", power},
          {"b3_coefficients", pt.b3_model.w},
          {"top_k_slice_pairs", top},
          {"detection_table", cells},
          {"dprime_drop", drops}};
}

inline void write_power_csv(std::ostream& out, const PowerTable& t) {
  out << "feature_set,stage,task,n_features,auc,raw_auc,swapped,dprime,heldout_auc\n";
  out.precision(17);
  for (const auto& r : t.rows)
    out << '"' << r.name << "\"," << r.stage << ',' << r.task << ',' << r.features.size() << ','
        << r.pooled.power << ',' << r.pooled.raw_auc << ',' << (r.pooled.swapped ? 1 : 0) << ','
        << r.pooled.dprime.value << ',' << r.heldout.value_or(std::nan("")) << '\n';
}

inline void write_detection_csv(std::ostream& out, const DetectionTable& t) {
  out << "level,mode,auc,ci_halfwidth,dprime,n_pos,n_neg\n";
  out.precision(17);
  for (const auto& c : t.cells) {
    out << c.level << ',' << to_string(c.mode) << ',' << c.roc.auc << ',';
    if (c.roc.ci_halfwidth) out << *c.roc.ci_halfwidth;
    out << ',' << c.roc.dprime.value << ',' << c.roc.n_pos << ',' << c.roc.n_neg << '\n';
  }
}

inline void write_dprime_csv(std::ostream& out, const DetectionTable& t) {
  out << "mode,dprime_simple,dprime_complex,auc_drop,percent_dprime_drop\n";
  out.precision(17);
  for (const auto& d : t.drops)
    out << to_string(d.mode) << ',' << d.simple.value << ',' << d.complex.value << ',' << d.auc_drop << ','
        << d.percent_drop << '\n';
}

inline void write_histogram_csv(std::ostream& out, const DetectionTable& t) {
  out << "level,mode,label,bin,lo,hi,count\n";
  for (const auto& c : t.cells) {
    const std::size_t n = c.hist_lesion.size();
    for (int lab = 0; lab < 2; ++lab) {
      const auto& h = lab ? c.hist_lesion : c.hist_healthy;
      for (std::size_t b = 0; b < n; ++b)
        out << c.level << ',' << to_string(c.mode) << ',' << (lab ? "lesion" : "healthy") << ',' << b << ','
            << 3.0 * b / n << ',' << 3.0 * (b + 1) / n << ',' << h[b] << '\n';
    }
  }
}

struct ReportBundle {
  DatasetFeatures data;
  PowerTable power;
  DetectionTable detection;
  nlohmann::json report;
};

inline ReportBundle run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ReportBundle b;
  b.data = compute_dataset_features(cfg);
  b.power = run_power_table(cfg, b.data);
  b.detection = run_detection_table(cfg, b.data);
  b.report = report_json(cfg, b.data, b.power, b.detection);
  return b;
}

/// Runs the experiment and writes report.json plus CSV tables into
/// cfg.output_dir. Files are staged in a sibling directory and moved into
/// place only when everything succeeded.
inline ReportBundle run_all(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  ReportBundle b = run_experiment(cfg);
  const fs::path out = cfg.output_dir;
  const fs::path stage = fs::path(out.string() + ".partial");
  std::error_code ec;
  fs::remove_all(stage, ec);
  try {
    fs::create_directories(stage);
    auto open = [&](const char* name) {
      std::ofstream f(stage / name);
      if (!f) throw IoError("cannot write " + (stage / name).string());
      return f;
    };
    {
      auto f = open("report.json");
      f << b.report.dump(2) << '\n';
    }
    {
      auto f = open("power_table.csv");
      write_power_csv(f, b.power);
    }
    {
      auto f = open("detection_table.csv");
      write_detection_csv(f, b.detection);
    }
    {
      auto f = open("dprime_drop.csv");
      write_dprime_csv(f, b.detection);
    }
    {
      auto f = open("histograms.csv");
      write_histogram_csv(f, b.detection);
    }
    {
      auto f = open("b3_coefficients.csv");
      write_coefficients_csv(f, export_coefficients(b.power.b3_model));
    }
    {
      auto f = open("features_post_hvs.csv");
      write_features_csv(f, b.data.post);
    }
    {
      auto f = open("features_pre_hvs.csv");
      write_features_csv(f, b.data.pre);
    }
    fs::create_directories(out);
    for (const auto& entry : fs::directory_iterator(stage)) fs::rename(entry.path(), out / entry.path().filename());
    fs::remove_all(stage);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(stage, ec);
    throw IoError(e.what());
  } catch (...) {
    fs::remove_all(stage, ec);
    throw;
  }
  return b;
}

}  // namespace anthro
