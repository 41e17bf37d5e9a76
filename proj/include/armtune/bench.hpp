#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "armtune/errors.hpp"
#include "armtune/study.hpp"
#include "armtune/tpe.hpp"

namespace armtune {

enum class BenchFunction : std::uint8_t { kSphere = 0, kBowl = 1 };

inline BenchFunction bench_function_from_string(const std::string& s) {
  if (s == "sphere") return BenchFunction::kSphere;
  if (s == "bowl") return BenchFunction::kBowl;
  throw UsageError("unknown benchmark function '" + s + "', expected sphere or bowl");
}

inline SearchSpace bench_space(BenchFunction fn) {
  SearchSpace s;
  if (fn == BenchFunction::kSphere) {
    s.domains = {{"x", DomainKind::kUniform, -5.0, 5.0, {}}, {"y", DomainKind::kUniform, -5.0, 5.0, {}}};
  } else {
    s.domains = {{"x", DomainKind::kUniform, -5.0, 10.0, {}}, {"y", DomainKind::kUniform, 0.0, 15.0, {}}};
  }
  return s;
}

// Maximization targets: negated sphere and a negated Branin-style bowl.
inline double bench_value(BenchFunction fn, double x, double y) {
  if (fn == BenchFunction::kSphere) return -(x * x + y * y);
  const double a = 1.0, b = 5.1 / (4.0 * std::numbers::pi * std::numbers::pi), c = 5.0 / std::numbers::pi;
  const double r = 6.0, s = 10.0, t = 1.0 / (8.0 * std::numbers::pi);
  const double inner = y - b * x * x + c * x - r;
  return -(a * inner * inner + s * (1.0 - t) * std::cos(x) + s);
}

struct BenchSeedRow {
  std::uint64_t seed = 0;
  double tpe_best = 0.0;
  double random_best = 0.0;
};

struct BenchResult {
  std::vector<BenchSeedRow> rows;  // one per seed
  double tpe_median = 0.0;
  double random_median = 0.0;
  int tpe_wins = 0;  // strict paired wins
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Paired TPE-vs-random studies sharing per-seed randomness.
inline BenchResult bench_tpe(BenchFunction fn, int n_trials, int n_seeds, const TpeConfig& tpe = {},
                             std::uint64_t base_seed = 0) {
  if (n_seeds < 2) throw UsageError("bench_tpe: n_seeds must be >= 2");
  const SearchSpace space = bench_space(fn);
  auto objective = [fn](const ParamMap& params, std::uint64_t) {
    TrialOutcome out;
    out.value = bench_value(fn, as_double(params.at("x")), as_double(params.at("y")));
    out.breakdown.tail_mean_reward = out.value;
    return out;
  };

  BenchResult result;
  std::vector<double> tpe_bests, random_bests;
  for (int s = 0; s < n_seeds; ++s) {
    StudyConfig cfg;
    cfg.n_trials = n_trials;
    cfg.tpe = tpe;
    cfg.tpe.n_startup_trials = std::min(tpe.n_startup_trials, n_trials);
    cfg.space = space;
    cfg.base_seed = base_seed + 1000 * static_cast<std::uint64_t>(s);
    cfg.trial_budget_episodes = 1;  // unused by the math objective
    cfg.sampler = SamplerKind::kTpe;
    const StudyResult tpe_run = run_study(cfg, objective);
    cfg.sampler = SamplerKind::kRandom;
    const StudyResult random_run = run_study(cfg, objective);

    BenchSeedRow row;
    row.seed = cfg.base_seed;
    row.tpe_best = tpe_run.best.trial.value;
    row.random_best = random_run.best.trial.value;
    result.rows.push_back(row);
    tpe_bests.push_back(row.tpe_best);
    random_bests.push_back(row.random_best);
    if (row.tpe_best > row.random_best) ++result.tpe_wins;
  }
  result.tpe_median = detail::median(tpe_bests);
  result.random_median = detail::median(random_bests);
  return result;
}

inline void write_bench_csv(const std::string& path, const BenchResult& r) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os.precision(17);
  os << "seed,tpe_best,random_best\n";
  for (const auto& row : r.rows) os << row.seed << ',' << row.tpe_best << ',' << row.random_best << '\n';
  os << "median," << r.tpe_median << ',' << r.random_median << '\n';
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace armtune
