// Command-line front end: dataset generation, feature extraction, complexity
// model training, observer evaluation, ROC reports, full tables, and the
// reader-study server.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "anthro/decision.hpp"
#include "anthro/feature_table.hpp"
#include "anthro/hotelling.hpp"
#include "anthro/pipeline.hpp"
#include "anthro/roc.hpp"
#include "anthro/stack_io.hpp"
#include "anthro/study_server.hpp"

namespace {

using nlohmann::json;
using namespace anthro;

std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad level list '" + s + "'");
    }
  }
  return out;
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  json j = path.empty() ? json::object() : read_json_file(path);
  if (seed) j["master_seed"] = *seed;
  return experiment_config_from_json(j);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  return f;
}

// Lowest and highest complexity level present in a feature table.
std::pair<int, int> level_range(const std::vector<FeatureRow>& rows) {
  if (rows.empty()) throw InsufficientDataError("feature table is empty");
  int lo = rows.front().level, hi = lo;
  for (const auto& r : rows) lo = std::min(lo, r.level), hi = std::max(hi, r.level);
  if (lo == hi) throw InsufficientDataError("feature table holds a single complexity level");
  return {lo, hi};
}

int cmd_generate(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
                 std::optional<int> n, const std::string& levels, unsigned threads) {
  ExperimentConfig cfg = load_config(config, seed);
  if (n) cfg.n_per_cell = *n;
  if (!levels.empty()) cfg.levels = parse_levels(levels);
  if (threads) cfg.threads = threads;
  const json manifest = generate_dataset(cfg.gen, cfg.n_per_cell, cfg.levels, out, cfg.worker_count());
  std::cout << "wrote " << manifest.at("stacks").size() << " stacks to " << out << "\n";
  return 0;
}

int cmd_features(const std::string& config, const std::string& data, const std::string& stage_name,
                 const std::string& out, unsigned threads) {
  ExperimentConfig cfg = load_config(config, std::nullopt);
  if (threads) cfg.threads = threads;
  const Stage stage = stage_from_string(stage_name);
  const json manifest = read_json_file(std::filesystem::path(data) / "manifest.json");
  const auto& stacks = manifest.at("stacks");
  std::vector<FeatureRow> rows(stacks.size());
  parallel_for(rows.size(), cfg.worker_count(), [&](std::size_t i) {
    rows[i] = extract_features(stage_view(load_stack(data, stacks.at(i)), stage, cfg.hvs));
  });
  auto f = open_out(out);
  write_features_csv(f, rows);
  std::cout << "wrote features of " << rows.size() << " stacks (" << to_string(stage) << ") to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& features, const std::string& set, const std::string& mode, const std::string& out,
              const std::string& coefficients, std::size_t top_k) {
  const auto rows = read_features_csv(features);
  const auto [lo, hi] = level_range(rows);
  const int pairs = static_cast<int>(rows.front().complexity.b3.size());
  std::vector<std::string> names = feature_names(set, pairs);
  if (mode != "pooled" && mode != "partitioned") throw ConfigError("mode must be pooled or partitioned");
  const auto group = assign_groups(rows, 4);
  auto matrix = [&](int level, int part) {
    Matrix m;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].level == level && (part < 0 || (group[i] < 2) == (part == 0)))
        m.append_row(feature_vector(rows[i], names));
    return m;
  };
  const int train_part = mode == "pooled" ? -1 : 0;
  const int test_part = mode == "pooled" ? -1 : 1;
  HotellingModel model = train_hotelling(matrix(lo, train_part), matrix(hi, train_part), names);
  if (top_k > 0) {
    std::vector<std::string> reduced;
    for (auto i : select_top_k(model, top_k)) reduced.push_back(names[i]);
    names = reduced;
    model = train_hotelling(matrix(lo, train_part), matrix(hi, train_part), names);
  }
  const FeaturePower p = feature_power(scores(model, matrix(lo, test_part)), scores(model, matrix(hi, test_part)));
  write_json_file(out, to_json(model));
  if (!coefficients.empty()) {
    auto f = open_out(coefficients);
    write_coefficients_csv(f, export_coefficients(model));
  }
  json summary{{"features", names},     {"mode", mode},         {"levels", {lo, hi}},
               {"auc", p.power},         {"raw_auc", p.raw_auc}, {"swapped", p.swapped}};
  summary["dprime"] = p.dprime.saturated ? json(nullptr) : json(p.dprime.value);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& features, const std::string& pre_features, const std::string& mode_name,
                 double kappa, const std::string& model_path, const std::string& out, bool joint,
                 std::uint64_t seed, bool continuous) {
  const auto post = read_features_csv(features);
  std::vector<FeatureRow> pre;
  DecisionConfig dc;
  dc.mode = estimation_mode_from_string(mode_name);
  dc.kappa = kappa;
  dc.master_seed = seed;
  dc.binary_complexity = !continuous;
  std::optional<HotellingModel> model;
  if (dc.mode == EstimationMode::pre_hvs || dc.mode == EstimationMode::post_hvs) {
    if (model_path.empty()) throw ConfigError("--model is required for mode " + mode_name);
    model = hotelling_from_json(read_json_file(model_path));
  }
  if (dc.mode == EstimationMode::pre_hvs) {
    if (pre_features.empty()) throw ConfigError("--pre-features is required for mode pre-hvs");
    pre = read_features_csv(pre_features);
  }
  std::map<std::uint64_t, const FeatureRow*> pre_by_id;
  for (const auto& r : pre) pre_by_id[r.stack_id] = &r;

  const int lo = level_range(post).first;
  std::vector<LesionFeatures> simple;
  for (const auto& r : post)
    if (r.level == lo) simple.push_back(r.lesion);
  const FeatureScale scale = feature_scale(simple);

  std::map<int, std::vector<DecisionInput>> sets;
  for (const auto& r : post) {
    const FeatureRow* p = nullptr;
    if (!pre.empty()) {
      auto it = pre_by_id.find(r.stack_id);
      if (it == pre_by_id.end()) throw DataError("stack " + std::to_string(r.stack_id) + " missing from pre-HVS table");
      p = it->second;
    }
    sets[joint ? 0 : r.level].push_back({&r, p});
  }
  std::vector<StackScore> all;
  for (const auto& [key, inputs] : sets) {
    const auto s = decide_dataset(inputs, model ? &*model : nullptr, dc, scale);
    all.insert(all.end(), s.begin(), s.end());
  }
  auto f = open_out(out);
  write_scores_csv(f, all);
  std::cout << "wrote " << all.size() << " scores to " << out << "\n";
  return 0;
}

json dprime_value(const DPrime& d) { return d.saturated ? json(nullptr) : json(d.value); }

int cmd_report(const std::string& scores_path, const std::string& out, int bins) {
  std::ifstream in(scores_path);
  if (!in) throw IoError("cannot read " + scores_path);
  const auto scores = read_scores_csv(in);
  std::map<int, std::vector<StackScore>> by_level;
  for (const auto& s : scores) by_level[s.level].push_back(s);
  json levels = json::array();
  for (const auto& [level, set] : by_level) {
    std::vector<double> pos, neg;
    int top = 1;
    for (const auto& s : set) {
      (s.label == Label::lesion ? pos : neg).push_back(s.score);
      top = std::max(top, s.score);
    }
    const double hi = std::max<double>(static_cast<double>(set.size()), top);
    json j{{"level", level}, {"n_lesion", pos.size()}, {"n_healthy", neg.size()}};
    if (!pos.empty() && !neg.empty()) {
      const RocResult r = roc_result(pos, neg);
      j["auc"] = r.auc;
      j["dprime"] = dprime_value(r.dprime);
    }
    j["histogram"] = {{"healthy", neg.empty() ? std::vector<std::size_t>{} : score_histogram(neg, bins, 1.0, hi)},
                      {"lesion", pos.empty() ? std::vector<std::size_t>{} : score_histogram(pos, bins, 1.0, hi)}};
    levels.push_back(std::move(j));
  }
  json report{{"scores", scores_path}, {"levels", levels}};
  auto f = open_out(out);
  f << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_tables(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
               unsigned threads) {
  ExperimentConfig cfg = load_config(config, seed);
  if (!out.empty()) cfg.output_dir = out;
  if (threads) cfg.threads = threads;
  const ReportBundle b = run_all(cfg);
  std::printf("%-16s %-9s %-11s %7s %9s\n", "feature set", "stage", "task", "AUC", "held-out");
  for (const auto& r : b.power.rows)
    std::printf("%-16s %-9s %-11s %7.3f %9.3f\n", r.name.c_str(), r.stage.c_str(), r.task.c_str(), r.pooled.power,
                r.heldout.value_or(0.0));
  std::printf("\n%-6s %-9s %7s %7s\n", "level", "mode", "AUC", "+/-");
  for (const auto& c : b.detection.cells) {
    std::printf("%-6d %-9s %7.3f", c.level, to_string(c.mode), c.roc.auc);
    if (c.roc.ci_halfwidth) std::printf(" %7.3f", *c.roc.ci_halfwidth);
    std::printf("\n");
  }
  std::printf("\n%-9s %9s %9s %8s\n", "mode", "d' simple", "d' cmplx", "drop %");
  for (const auto& d : b.detection.drops)
    std::printf("%-9s %9.3f %9.3f %8.1f\n", to_string(d.mode), d.simple.value, d.complex.value, d.percent_drop);
  std::cout << "\nreport written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_serve(const std::string& data, const std::string& sessions, const std::string& host, int port) {
  StudyStore store(data, sessions.empty() ? std::filesystem::path(data) / "sessions" : std::filesystem::path(sessions));
  StudyServer server(store);
  std::cout << "serving " << store.entries().size() << " stacks on http://" << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anthropomorphic model observer workbench"};
  app.require_subcommand(1);

  std::string config, out, data, stage = "post-hvs", levels, features, pre_features, set = "b3", mode,
                                  model, coefficients, scores, sessions, host = "127.0.0.1";
  std::optional<std::uint64_t> seed;
  std::optional<int> n;
  unsigned threads = 0;
  double kappa = 8.0;
  bool joint = false, continuous = false;
  std::size_t top_k = 0;
  int bins = 4, port = 8080;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic stack dataset");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--n", n, "Stacks per (label, level) cell");
  gen->add_option("--levels", levels, "Comma-separated complexity levels, e.g. 0,4");
  gen->add_option("--seed", seed, "Master seed");
  gen->add_option("--config", config, "Experiment config JSON");
  gen->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* feat = app.add_subcommand("features", "Extract lesion and complexity features");
  feat->add_option("--data", data, "Dataset directory")->required();
  feat->add_option("--stage", stage, "pre-hvs or post-hvs");
  feat->add_option("--out", out, "Output CSV")->required();
  feat->add_option("--config", config, "Experiment config JSON (HVS settings)");
  feat->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* train = app.add_subcommand("train-complexity", "Train a Hotelling complexity estimator");
  train->add_option("--features", features, "Features CSV")->required();
  train->add_option("--set", set, "Feature set: f, b1, b2, b3, b4, b3:i,j,...");
  std::string train_mode = "pooled";
  train->add_option("--mode", train_mode, "pooled or partitioned");
  train->add_option("--top-k", top_k, "Retrain on the k largest-magnitude weights");
  train->add_option("--out", out, "Model JSON")->required();
  train->add_option("--coefficients", coefficients, "Coefficient CSV");

  auto* eval = app.add_subcommand("evaluate", "Score stacks with the min-rank observer");
  eval->add_option("--features", features, "Post-HVS features CSV")->required();
  eval->add_option("--pre-features", pre_features, "Pre-HVS features CSV (mode pre-hvs)");
  std::string eval_mode = "none";
  eval->add_option("--mode", eval_mode, "none, ideal, pre-hvs or post-hvs");
  eval->add_option("--kappa", kappa, "Noise gain");
  eval->add_option("--model", model, "Complexity model JSON");
  eval->add_option("--out", out, "Scores CSV")->required();
  eval->add_flag("--joint", joint, "Rank all levels together instead of per level");
  eval->add_flag("--continuous", continuous, "Use the continuous complexity estimate");
  std::uint64_t eval_seed = ExperimentConfig{}.master_seed;
  eval->add_option("--seed", eval_seed, "Master seed for the feature noise");

  auto* rep = app.add_subcommand("report", "ROC analysis of a scores CSV");
  rep->add_option("--scores", scores, "Scores CSV")->required();
  rep->add_option("--out", out, "Report JSON")->required();
  rep->add_option("--bins", bins, "Histogram bins");

  auto* tab = app.add_subcommand("tables", "Run the full experiment and write all tables");
  tab->add_option("--config", config, "Experiment config JSON");
  tab->add_option("--seed", seed, "Master seed");
  tab->add_option("--out", out, "Output directory");
  tab->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* srv = app.add_subcommand("serve", "Serve reader-study sessions over HTTP");
  srv->add_option("--data", data, "Dataset directory")->required();
  srv->add_option("--sessions", sessions, "Session directory (default: <data>/sessions)");
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--port", port, "Port");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(config, seed, out, n, levels, threads);
    if (*feat) return cmd_features(config, data, stage, out, threads);
    if (*train) return cmd_train(features, set, train_mode, out, coefficients, top_k);
    if (*eval) return cmd_evaluate(features, pre_features, eval_mode, kappa, model, out, joint, eval_seed, continuous);
    if (*rep) return cmd_report(scores, out, bins);
    if (*tab) return cmd_tables(config, seed, out, threads);
    if (*srv) return cmd_serve(data, sessions, host, port);
  } catch (const anthro::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
