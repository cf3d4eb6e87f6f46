#pragma once

// Reader-study sessions: blinded, seeded trial sequences over a generated
// dataset, an append-only score log per session, and ROC analysis of scores.

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "anthro/core.hpp"
#include "anthro/png.hpp"
#include "anthro/rng.hpp"
#include "anthro/roc.hpp"
#include "anthro/stack_io.hpp"

namespace anthro {

/// Reader scale: certain absent, probably absent, probably present, certain present.
inline constexpr int kMinScore = 0;
inline constexpr int kMaxScore = 3;

struct Condition {
  int level = 0;
  Label label = Label::healthy;
  bool operator==(const Condition&) const = default;
};

struct StudyPlan {
  std::vector<Condition> conditions;
  int stacks_per_condition = 35;
  std::uint64_t seed = 1;
  double frame_rate = 10.0;

  void validate() const {
    if (conditions.empty()) throw ConfigError("study plan needs at least one condition");
    if (stacks_per_condition < 1) throw ConfigError("stacks_per_condition must be >= 1");
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw ConfigError("frame_rate must be positive");
    for (std::size_t i = 0; i < conditions.size(); ++i)
      for (std::size_t j = i + 1; j < conditions.size(); ++j)
        if (conditions[i] == conditions[j]) throw ConfigError("study plan lists a condition twice");
  }
};

/// Six reading conditions: levels {0, 2, 4} x {healthy, lesion}.
inline StudyPlan six_condition_plan(int stacks_per_condition = 35, std::uint64_t seed = 1) {
  StudyPlan p;
  for (int level : {0, 2, 4})
    for (Label l : {Label::healthy, Label::lesion}) p.conditions.push_back({level, l});
  p.stacks_per_condition = stacks_per_condition;
  p.seed = seed;
  return p;
}

inline nlohmann::json to_json(const StudyPlan& p) {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : p.conditions) conds.push_back({{"level", c.level}, {"label", to_string(c.label)}});
  return {{"conditions", conds},
          {"stacks_per_condition", p.stacks_per_condition},
          {"seed", p.seed},
          {"frame_rate", p.frame_rate}};
}

inline StudyPlan study_plan_from_json(const nlohmann::json& j) {
  StudyPlan p;
  try {
    for (const auto& c : j.at("conditions"))
      p.conditions.push_back({c.at("level").get<int>(), label_from_string(c.at("label").get<std::string>())});
    p.stacks_per_condition = j.value("stacks_per_condition", p.stacks_per_condition);
    p.seed = j.value("seed", p.seed);
    p.frame_rate = j.value("frame_rate", p.frame_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed study plan: ") + e.what());
  }
  p.validate();
  return p;
}

struct TrialRecord {
  std::string session_id;
  int trial = 0;  // 1-based
  std::uint64_t stack_id = 0;
  int score = 0;
  double response_time_ms = 0.0;
  double frame_rate = 0.0;
};

inline nlohmann::json to_json(const TrialRecord& r) {
  return {{"session_id", r.session_id}, {"trial", r.trial},
          {"stack_id", r.stack_id},     {"score", r.score},
          {"response_time_ms", r.response_time_ms}, {"frame_rate", r.frame_rate}};
}

inline TrialRecord trial_record_from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.trial = j.at("trial").get<int>();
  r.stack_id = j.at("stack_id").get<std::uint64_t>();
  r.score = j.at("score").get<int>();
  r.response_time_ms = j.at("response_time_ms").get<double>();
  r.frame_rate = j.at("frame_rate").get<double>();
  return r;
}

/// A scored trial joined with its (server-side) ground truth.
struct ScoredTrial {
  int level = 0;
  Label label = Label::healthy;
  int score = 0;
};

struct LevelResult {
  int level = 0;
  std::size_t n_lesion = 0;
  std::size_t n_healthy = 0;
  std::optional<RocResult> roc;  // needs both classes
  std::vector<std::size_t> hist_healthy;
  std::vector<std::size_t> hist_lesion;
};

/// Per complexity level: AUC and d' of lesion vs healthy scores, and 4-bin
/// histograms of the 0..3 scores per label.
inline std::vector<LevelResult> study_results(const std::vector<ScoredTrial>& trials) {
  if (trials.empty()) throw InsufficientDataError("no scored trials");
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_level;
  for (const auto& t : trials) {
    if (t.score < kMinScore || t.score > kMaxScore) throw DataError("score outside 0..3");
    auto& [healthy, lesion] = by_level[t.level];
    (t.label == Label::lesion ? lesion : healthy).push_back(t.score);
  }
  std::vector<LevelResult> out;
  for (const auto& [level, sets] : by_level) {
    const auto& [healthy, lesion] = sets;
    LevelResult r;
    r.level = level;
    r.n_healthy = healthy.size();
    r.n_lesion = lesion.size();
    if (!healthy.empty() && !lesion.empty()) r.roc = roc_result(lesion, healthy);
    r.hist_healthy = score_histogram(healthy, 4, kMinScore, kMaxScore);
    r.hist_lesion = score_histogram(lesion, 4, kMinScore, kMaxScore);
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json to_json(const std::vector<LevelResult>& results) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json j{{"level", r.level},
                     {"n_lesion", r.n_lesion},
                     {"n_healthy", r.n_healthy},
                     {"histogram", {{"healthy", r.hist_healthy}, {"lesion", r.hist_lesion}}}};
    if (r.roc) {
      j["auc"] = r.roc->auc;
      j["dprime"] = r.roc->dprime.saturated ? nlohmann::json(nullptr) : nlohmann::json(r.roc->dprime.value);
      j["dprime_saturated"] = r.roc->dprime.saturated;
    } else {
      j["auc"] = nullptr;
      j["dprime"] = nullptr;
    }
    levels.push_back(std::move(j));
  }
  return {{"levels", levels}};
}

// Errors surfaced to HTTP clients with a status code.
struct NotFound : Error {
  using Error::Error;
};
struct Conflict : Error {
  using Error::Error;
};
struct Invalid : Error {
  using Error::Error;
};

namespace detail {

inline void sodium_ready() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error("libsodium initialization failed");
}

inline std::string to_hex(const unsigned char* p, std::size_t n) {
  std::string s(2 * n + 1, '\0');
  sodium_bin2hex(s.data(), s.size(), p, n);
  s.resize(2 * n);
  return s;
}

inline std::vector<unsigned char> from_hex(const std::string& hex) {
  std::vector<unsigned char> out(hex.size() / 2);
  std::size_t len = 0;
  if (sodium_hex2bin(out.data(), out.size(), hex.c_str(), hex.size(), nullptr, &len, nullptr) != 0 ||
      len != out.size())
    throw DataError("malformed hex string");
  return out;
}

inline bool valid_session_id(const std::string& id) {
  return id.size() == 32 && std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace detail

struct Trial {
  std::uint64_t stack_id = 0;
  std::string token;  // keyed hash; reveals nothing about the stack
};

/// Trial order for a plan: stacks_per_condition stacks drawn per condition,
/// then shuffled. A pure function of (plan, dataset).
inline std::vector<std::uint64_t> plan_trials(const StudyPlan& plan, const std::vector<DatasetEntry>& available) {
  plan.validate();
  std::vector<std::uint64_t> ids;
  for (std::size_t ci = 0; ci < plan.conditions.size(); ++ci) {
    const auto& c = plan.conditions[ci];
    std::vector<std::uint64_t> pool;
    for (const auto& e : available)
      if (e.level == c.level && e.label == c.label) pool.push_back(e.stack_id);
    if (pool.size() < static_cast<std::size_t>(plan.stacks_per_condition))
      throw InsufficientDataError("dataset has " + std::to_string(pool.size()) + " stacks for level " +
                                  std::to_string(c.level) + "/" + to_string(c.label) + ", plan needs " +
                                  std::to_string(plan.stacks_per_condition));
    std::sort(pool.begin(), pool.end());
    Engine pick = make_engine(plan.seed, ci, "study-select");
    std::shuffle(pool.begin(), pool.end(), pick);
    ids.insert(ids.end(), pool.begin(), pool.begin() + plan.stacks_per_condition);
  }
  Engine order = make_engine(plan.seed, 0, "study-order");
  std::shuffle(ids.begin(), ids.end(), order);
  return ids;
}

/// One reader session. Trial list and key are immutable after creation; the
/// score log only grows.
class Session {
 public:
  Session(std::string id, StudyPlan plan, std::vector<Trial> trials, std::string key_hex,
          std::filesystem::path dir)
      : id_(std::move(id)), plan_(std::move(plan)), trials_(std::move(trials)), key_hex_(std::move(key_hex)),
        dir_(std::move(dir)) {}

  const std::string& id() const { return id_; }
  const StudyPlan& plan() const { return plan_; }
  const std::vector<Trial>& trials() const { return trials_; }
  std::size_t size() const { return trials_.size(); }

  const Trial& trial(int k) const {
    if (k < 1 || static_cast<std::size_t>(k) > trials_.size())
      throw NotFound("trial " + std::to_string(k) + " does not exist");
    return trials_[k - 1];
  }

  std::size_t scored() const {
    std::lock_guard lock(mutex_);
    return records_.size();
  }
  bool complete() const { return scored() == trials_.size(); }

  std::vector<TrialRecord> records() const {
    std::lock_guard lock(mutex_);
    std::vector<TrialRecord> out;
    for (const auto& [k, r] : records_) out.push_back(r);
    return out;
  }

  /// 1-based number of the first unscored trial, if any.
  std::optional<int> next_trial() const {
    std::lock_guard lock(mutex_);
    for (std::size_t k = 1; k <= trials_.size(); ++k)
      if (!records_.count(static_cast<int>(k))) return static_cast<int>(k);
    return std::nullopt;
  }

  TrialRecord submit(int k, int score, double response_time_ms) {
    if (score < kMinScore || score > kMaxScore) throw Invalid("score must be an integer in 0..3");
    if (!(response_time_ms >= 0.0) || !std::isfinite(response_time_ms))
      throw Invalid("response_time_ms must be a finite non-negative number");
    const Trial& t = trial(k);
    std::lock_guard lock(mutex_);
    if (records_.count(k)) throw Conflict("trial " + std::to_string(k) + " is already scored");
    TrialRecord r{id_, k, t.stack_id, score, response_time_ms, plan_.frame_rate};
    std::ofstream log(log_path(), std::ios::app);
    if (!log) throw IoError("cannot append to " + log_path().string());
    log << to_json(r).dump() << '\n';
    log.flush();
    if (!log) throw IoError("write to " + log_path().string() + " failed");
    records_.emplace(k, r);
    return r;
  }

  /// Rebuilds the scored set from the log (used on load).
  void replay() {
    std::lock_guard lock(mutex_);
    records_.clear();
    std::ifstream in(log_path());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      TrialRecord r;
      try {
        r = trial_record_from_json(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt trial log " + log_path().string() + ": " + e.what());
      }
      if (r.trial < 1 || static_cast<std::size_t>(r.trial) > trials_.size() ||
          trials_[r.trial - 1].stack_id != r.stack_id)
        throw DataError("trial log does not match session " + id_);
      records_.emplace(r.trial, r);  // first record wins
    }
  }

  std::filesystem::path log_path() const { return dir_ / "trials.jsonl"; }
  std::filesystem::path meta_path() const { return dir_ / "session.json"; }

  nlohmann::json meta_json() const {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : trials_) trials.push_back({{"stack_id", t.stack_id}, {"token", t.token}});
    return {{"session_id", id_}, {"plan", to_json(plan_)}, {"key", key_hex_}, {"trials", trials}};
  }

 private:
  std::string id_;
  StudyPlan plan_;
  std::vector<Trial> trials_;
  std::string key_hex_;
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<int, TrialRecord> records_;
};

/// Sessions over one generated dataset directory. Session state lives under
/// <sessions_dir>/<id>/ as session.json plus the trials.jsonl log.
class StudyStore {
 public:
  StudyStore(std::filesystem::path data_dir, std::filesystem::path sessions_dir)
      : data_dir_(std::move(data_dir)), sessions_dir_(std::move(sessions_dir)) {
    detail::sodium_ready();
    manifest_ = read_json_file(data_dir_ / "manifest.json");
    for (const auto& s : manifest_.at("stacks")) {
      const auto id = s.at("stack_id").get<std::uint64_t>();
      entries_.push_back({id, label_from_string(s.at("label").get<std::string>()),
                          s.at("complexity_level").get<int>()});
      sidecars_.emplace(id, s);
    }
    std::error_code ec;
    std::filesystem::create_directories(sessions_dir_, ec);
    if (ec) throw IoError("cannot create " + sessions_dir_.string());
  }

  const std::vector<DatasetEntry>& entries() const { return entries_; }

  std::shared_ptr<Session> create_session(const StudyPlan& plan) {
    const auto ids = plan_trials(plan, entries_);
    unsigned char raw_id[16], key[crypto_generichash_KEYBYTES];
    randombytes_buf(raw_id, sizeof raw_id);
    randombytes_buf(key, sizeof key);
    const std::string id = detail::to_hex(raw_id, sizeof raw_id);
    std::vector<Trial> trials;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::string msg = id + ":" + std::to_string(k + 1) + ":" + std::to_string(ids[k]);
      unsigned char h[16];
      crypto_generichash(h, sizeof h, reinterpret_cast<const unsigned char*>(msg.data()), msg.size(), key,
                         sizeof key);
      trials.push_back({ids[k], detail::to_hex(h, sizeof h)});
    }
    const auto dir = sessions_dir_ / id;
    std::filesystem::create_directories(dir);
    auto s = std::make_shared<Session>(id, plan, std::move(trials), detail::to_hex(key, sizeof key), dir);
    write_json_file(s->meta_path(), s->meta_json());
    std::ofstream(s->log_path(), std::ios::app);
    std::unique_lock lock(mutex_);
    sessions_.emplace(id, s);
    return s;
  }

  /// Looks a session up in memory, falling back to its files on disk.
  std::shared_ptr<Session> session(const std::string& id) {
    if (!detail::valid_session_id(id)) throw NotFound("unknown session");
    {
      std::shared_lock lock(mutex_);
      if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
    }
    const auto dir = sessions_dir_ / id;
    if (!std::filesystem::exists(dir / "session.json")) throw NotFound("unknown session");
    const auto meta = read_json_file(dir / "session.json");
    std::vector<Trial> trials;
    for (const auto& t : meta.at("trials"))
      trials.push_back({t.at("stack_id").get<std::uint64_t>(), t.at("token").get<std::string>()});
    auto s = std::make_shared<Session>(id, study_plan_from_json(meta.at("plan")), std::move(trials),
                                       meta.at("key").get<std::string>(), dir);
    s->replay();
    std::unique_lock lock(mutex_);
    return sessions_.emplace(id, s).first->second;
  }

  /// Slice `frame` (1-based) of a trial's stack as an 8-bit PNG, using the
  /// stack's stored display mapping.
  std::string frame_png(const Session& s, int k, int frame) {
    const Trial& t = s.trial(k);
    const auto st = stack(t.stack_id);
    if (frame < 1 || frame > st->dims.slices)
      throw NotFound("frame " + std::to_string(frame) + " outside 1.." + std::to_string(st->dims.slices));
    return encode_png_gray8(st->dims.cols, st->dims.rows, render_slice(*st, frame));
  }

  static std::vector<std::uint8_t> render_slice(const Stack& st, int frame) {
    const SliceView v = st.slice(frame);
    std::vector<std::uint8_t> px(v.data.size());
    for (std::size_t i = 0; i < px.size(); ++i)
      px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(st.normalization.apply(v.data[i])), 0L, 255L));
    return px;
  }

  /// Scored trials joined with ground truth.
  std::vector<ScoredTrial> scored_trials(const Session& s) const {
    std::vector<ScoredTrial> out;
    for (const auto& r : s.records()) {
      const auto& side = sidecars_.at(r.stack_id);
      out.push_back({side.at("complexity_level").get<int>(), label_from_string(side.at("label").get<std::string>()),
                     r.score});
    }
    return out;
  }

  std::shared_ptr<const Stack> stack(std::uint64_t id) {
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(id); it != cache_.end()) return it->second;
    }
    auto side = sidecars_.find(id);
    if (side == sidecars_.end()) throw NotFound("stack missing from dataset");
    auto st = std::make_shared<const Stack>(load_stack(data_dir_, side->second));
    std::unique_lock lock(mutex_);
    return cache_.emplace(id, st).first->second;
  }

 private:
  std::filesystem::path data_dir_;
  std::filesystem::path sessions_dir_;
  nlohmann::json manifest_;
  std::vector<DatasetEntry> entries_;
  std::map<std::uint64_t, nlohmann::json> sidecars_;
  std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::uint64_t, std::shared_ptr<const Stack>> cache_;
};

}  // namespace anthro
