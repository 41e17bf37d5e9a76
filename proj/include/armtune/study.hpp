#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "armtune/arm_env.hpp"
#include "armtune/checkpoint.hpp"
#include "armtune/errors.hpp"
#include "armtune/hyperparams.hpp"
#include "armtune/metrics.hpp"
#include "armtune/presets.hpp"
#include "armtune/tpe.hpp"
#include "armtune/training.hpp"

namespace armtune {

enum class SamplerKind : std::uint8_t { kTpe = 0, kRandom = 1 };

struct TrialBreakdown {
  double tail_mean_reward = 0.0;  // the objective
  double success_rate = 0.0;      // quick deterministic probe, analysis only
};

struct TrialRecord {
  Trial trial;
  TrialBreakdown breakdown;
  std::int64_t history_size_at_suggest = 0;
  double duration_s = 0.0;  // wall clock; kept out of the journal
};

struct StudyConfig {
  Algo algo = Algo::kPpo;
  int n_trials = 20;
  TpeConfig tpe;  // carries n_startup_trials
  SamplerKind sampler = SamplerKind::kTpe;
  int trial_budget_episodes = 2000;
  int objective_eval_episodes = 200;  // tail window defining the objective
  int breakdown_eval_targets = 100;
  int breakdown_eval_max_steps = 5;
  std::uint64_t base_seed = 0;
  SearchSpace space;           // empty -> preset for algo
  std::string journal_path;    // empty -> in-memory only
  int jobs = 1;

  void validate() const {
    if (n_trials < 1) throw UsageError("StudyConfig: n_trials must be >= 1");
    if (tpe.n_startup_trials > n_trials) throw UsageError("StudyConfig: n_startup_trials must be <= n_trials");
    if (trial_budget_episodes < 1 || objective_eval_episodes < 1) throw UsageError("StudyConfig: budgets must be >= 1");
    if (jobs < 1) throw UsageError("StudyConfig: jobs must be >= 1");
  }

  SearchSpace effective_space() const { return space.domains.empty() ? search_space(algo) : space; }
};

struct TrialOutcome {
  bool failed = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  TrialBreakdown breakdown;
};

// Evaluates one hyperparameter configuration to a scalar objective.
using ObjectiveFn = std::function<TrialOutcome(const ParamMap& params, std::uint64_t seed)>;

// Journal line: ordered fields, params in search-space order, values rendered
// by the shortest-round-trip double formatter, so identical studies produce
// identical bytes.
inline std::string journal_line(const TrialRecord& r, const SearchSpace& space) {
  nlohmann::ordered_json j;
  j["id"] = r.trial.id;
  j["state"] = to_string(r.trial.state);
  j["seed"] = r.trial.seed;
  if (r.trial.state == TrialState::kComplete) {
    j["value"] = r.trial.value;
  } else {
    j["value"] = nullptr;
  }
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& d : space.domains) {
    auto it = r.trial.params.find(d.name);
    if (it != r.trial.params.end()) params[d.name] = detail::param_value_to_json(it->second);
  }
  j["params"] = std::move(params);
  j["breakdown"] = {{"tail_mean_reward", r.breakdown.tail_mean_reward}, {"success_rate", r.breakdown.success_rate}};
  j["started_at"] = r.trial.started_at;
  j["finished_at"] = r.trial.finished_at;
  j["history_size_at_suggest"] = r.history_size_at_suggest;
  return j.dump();
}

inline TrialRecord record_from_json(const nlohmann::json& j) {
  TrialRecord r;
  try {
    r.trial.id = j.at("id").get<std::int64_t>();
    const std::string state = j.at("state").get<std::string>();
    if (state == "complete") {
      r.trial.state = TrialState::kComplete;
    } else if (state == "failed") {
      r.trial.state = TrialState::kFailed;
    } else {
      r.trial.state = TrialState::kRunning;
    }
    r.trial.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("value") && !j.at("value").is_null()) r.trial.value = j.at("value").get<double>();
    r.trial.params = detail::params_from_json(j.at("params"));
    if (j.contains("breakdown")) {
      const auto& b = j.at("breakdown");
      if (b.contains("tail_mean_reward")) r.breakdown.tail_mean_reward = b.at("tail_mean_reward").get<double>();
      if (b.contains("success_rate")) r.breakdown.success_rate = b.at("success_rate").get<double>();
    }
    if (j.contains("started_at")) r.trial.started_at = j.at("started_at").get<std::int64_t>();
    if (j.contains("finished_at")) r.trial.finished_at = j.at("finished_at").get<std::int64_t>();
    if (j.contains("history_size_at_suggest")) {
      r.history_size_at_suggest = j.at("history_size_at_suggest").get<std::int64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("journal record: ") + e.what());
  }
  return r;
}

inline std::vector<TrialRecord> read_journal(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open journal: " + path);
  std::vector<TrialRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("journal " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    records.push_back(record_from_json(j));
  }
  return records;
}

// Highest value; ties go to the lowest id.
inline const TrialRecord& best_trial(const std::vector<TrialRecord>& records) {
  const TrialRecord* best = nullptr;
  for (const auto& r : records) {
    if (r.trial.state != TrialState::kComplete) continue;
    if (best == nullptr || r.trial.value > best->trial.value ||
        (r.trial.value == best->trial.value && r.trial.id < best->trial.id)) {
      best = &r;
    }
  }
  if (best == nullptr) throw UsageError("best_trial: no complete trials");
  return *best;
}

inline TrialRecord best_trial_in_journal(const std::string& path) { return best_trial(read_journal(path)); }

struct StudyResult {
  std::vector<TrialRecord> records;  // ordered by id
  TrialRecord best;
};

// Runs (or resumes) the warm-up + TPE loop over a generic objective. Each
// record is appended to the journal before the next suggestion; per-trial
// seed is base_seed + id; suggestion randomness is a pure function of
// (base_seed, id), so a resumed study continues exactly where an
// uninterrupted one would.
inline StudyResult run_study(const StudyConfig& config, const ObjectiveFn& objective, bool allow_resume = false) {
  config.validate();
  const SearchSpace space = config.effective_space();
  space.validate();

  std::vector<TrialRecord> records;
  if (!config.journal_path.empty() && std::filesystem::exists(config.journal_path)) {
    records = read_journal(config.journal_path);
    if (!records.empty() && !allow_resume) {
      throw UsageError("journal " + config.journal_path + " already has " + std::to_string(records.size()) +
                       " trials; resume to continue");
    }
    std::int64_t expect = 1;
    for (auto& r : records) {
      if (r.trial.id != expect++) throw IoError("journal ids are not gapless ascending in " + config.journal_path);
      if (r.trial.state == TrialState::kRunning) r.trial.state = TrialState::kFailed;  // orphan
      std::string why;
      if (!space.matches(r.trial.params, &why)) {
        throw UsageError("journal does not match the configured search space: trial " +
                         std::to_string(r.trial.id) + ": " + why);
      }
    }
  }

  std::ofstream journal;
  if (!config.journal_path.empty()) {
    const auto parent = std::filesystem::path(config.journal_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    journal.open(config.journal_path, std::ios::app);
    if (!journal) throw IoError("journal not writable: " + config.journal_path);
  }

  std::vector<Trial> history;
  history.reserve(config.n_trials);
  for (const auto& r : records) history.push_back(r.trial);

  std::mutex mu;
  std::int64_t clock = 2 * static_cast<std::int64_t>(records.size());
  std::int64_t next_id = static_cast<std::int64_t>(records.size()) + 1;

  auto worker = [&] {
    for (;;) {
      std::int64_t id = 0;
      ParamMap params;
      std::int64_t started_at = 0;
      std::int64_t hist_size = 0;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next_id > config.n_trials) return;
        id = next_id++;
        hist_size = static_cast<std::int64_t>(history.size());
        Rng suggest_rng(config.base_seed + static_cast<std::uint64_t>(id), Rng::stream_id("suggest"));
        TpeConfig tpe = config.tpe;
        if (config.sampler == SamplerKind::kRandom) tpe.n_startup_trials = std::numeric_limits<int>::max();
        params = tpe_suggest(space, history, suggest_rng, tpe);
        started_at = clock++;
      }

      const auto wall_start = std::chrono::steady_clock::now();
      const TrialOutcome outcome = objective(params, config.base_seed + static_cast<std::uint64_t>(id));
      const double duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

      {
        std::lock_guard<std::mutex> lock(mu);
        TrialRecord r;
        r.trial.id = id;
        r.trial.params = params;
        r.trial.seed = config.base_seed + static_cast<std::uint64_t>(id);
        r.trial.state = outcome.failed ? TrialState::kFailed : TrialState::kComplete;
        if (!outcome.failed) r.trial.value = outcome.value;
        r.trial.started_at = started_at;
        r.trial.finished_at = clock++;
        r.breakdown = outcome.breakdown;
        r.history_size_at_suggest = hist_size;
        r.duration_s = duration;
        history.push_back(r.trial);
        records.push_back(r);
        if (journal.is_open()) {
          journal << journal_line(r, space) << '\n';
          journal.flush();
          if (!journal) throw IoError("journal write failed: " + config.journal_path);
        }
      }
    }
  };

  if (config.jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(config.jobs);
    for (int i = 0; i < config.jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    std::sort(records.begin(), records.end(),
              [](const TrialRecord& a, const TrialRecord& b) { return a.trial.id < b.trial.id; });
  }

  StudyResult result;
  result.best = best_trial(records);
  result.records = std::move(records);
  return result;
}

// Trains a fresh agent from params and scores it by the mean episode reward
// over the final objective_eval_episodes training episodes. Numeric failures
// mark the trial failed; its parameters still steer TPE away.
inline TrialOutcome evaluate_trial(const ParamMap& params, Algo algo, const ArmModel& model,
                                   const StudyConfig& config, std::uint64_t seed,
                                   std::vector<EpisodeRecord>* curve_out = nullptr) {
  TrialOutcome out;
  try {
    Trainer trainer(algo, params, model, default_env_config(model, 50), seed);
    std::vector<double> rewards;
    rewards.reserve(config.trial_budget_episodes);
    trainer.train_episodes(config.trial_budget_episodes, [&](const EpisodeRecord& e) {
      rewards.push_back(e.reward);
      if (curve_out) curve_out->push_back(e);
    });
    const int tail = std::min<int>(config.objective_eval_episodes, static_cast<int>(rewards.size()));
    double sum = 0.0;
    for (int i = static_cast<int>(rewards.size()) - tail; i < static_cast<int>(rewards.size()); ++i) sum += rewards[i];
    out.value = sum / tail;
    out.breakdown.tail_mean_reward = out.value;
    if (config.breakdown_eval_targets > 0) {
      PolicyFn policy = [&](const Observation& obs) { return trainer.act(obs, true); };
      const SuccessEval ev =
          evaluate_success(policy, model, default_env_config(model, config.breakdown_eval_max_steps),
                           config.breakdown_eval_targets, Rng::stream_id("trial-eval") ^ seed);
      out.breakdown.success_rate = ev.rate;
    }
    if (!std::isfinite(out.value)) throw NumericError("trial objective is not finite");
  } catch (const NumericError&) {
    out.failed = true;
    out.value = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// The Fig.-2 style optimization loop over the reach task.
inline StudyResult run_rl_study(const StudyConfig& config, const ArmModel& model, bool allow_resume = false) {
  return run_study(
      config,
      [&](const ParamMap& params, std::uint64_t seed) {
        return evaluate_trial(params, config.algo, model, config, seed);
      },
      allow_resume);
}

}  // namespace armtune
