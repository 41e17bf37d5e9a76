#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "armtune/arm_env.hpp"
#include "armtune/errors.hpp"
#include "armtune/training.hpp"

namespace armtune {

struct CurvePoint {
  int episode = 0;  // strictly increasing from 1
  double reward = 0.0;
  int length = 0;
  bool success = false;
};

inline void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write curve log: " + path);
  os.precision(17);
  os << "episode,reward,length,success\n";
  for (const auto& p : curve) {
    os << p.episode << ',' << p.reward << ',' << p.length << ',' << (p.success ? 1 : 0) << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<CurvePoint> read_curve_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open curve log: " + path);
  std::vector<CurvePoint> curve;
  std::string line;
  if (!std::getline(is, line)) return curve;  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    CurvePoint p;
    char c1 = 0, c2 = 0, c3 = 0;
    int success = 0;
    std::istringstream ss(line);
    if (!(ss >> p.episode >> c1 >> p.reward >> c2 >> p.length >> c3 >> success) || c1 != ',' || c2 != ',' ||
        c3 != ',') {
      throw IoError("malformed curve log line in " + path + ": " + line);
    }
    p.success = success != 0;
    curve.push_back(p);
  }
  return curve;
}

// Trailing moving average; the first window-1 entries average what exists.
inline std::vector<double> trailing_moving_average(const std::vector<double>& values, int window) {
  if (window < 1) throw UsageError("trailing_moving_average: window must be >= 1");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= static_cast<std::size_t>(window)) acc -= values[i - window];
    out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

// First episode (1-based) whose smoothed reward closes `fraction` of the gap
// between the initial smoothed value and the smoothed maximum. Defined this
// way because a plain "fraction of the maximum" is meaningless for the
// all-negative reward curves this task produces.
inline std::optional<int> convergence_episodes(const std::vector<double>& rewards, double fraction, int window) {
  if (rewards.empty()) return std::nullopt;
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("convergence_episodes: fraction must be in (0, 1)");
  const std::vector<double> smoothed = trailing_moving_average(rewards, window);
  const double peak = *std::max_element(smoothed.begin(), smoothed.end());
  const double threshold = peak - (1.0 - fraction) * std::abs(peak - smoothed.front());
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    if (smoothed[i] >= threshold) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

// 1 - tuned/baseline, the paper-style convergence speedup.
inline double convergence_speedup(int tuned_episode, int baseline_episode) {
  if (baseline_episode <= 0) throw UsageError("convergence_speedup: baseline episode must be positive");
  return 1.0 - static_cast<double>(tuned_episode) / static_cast<double>(baseline_episode);
}

struct SuccessEval {
  double rate = 0.0;
  int successes = 0;
  int episodes = 0;
};

// Runs n_targets episodes under a deterministic policy; success means the
// episode terminated (goal reached) before truncation.
inline SuccessEval evaluate_success(const PolicyFn& policy, const ArmModel& model, EnvConfig env_config,
                                    int n_targets, std::uint64_t seed) {
  if (n_targets < 1) throw UsageError("evaluate_success: n_targets must be >= 1");
  ReachEnv env(model, env_config, seed);
  SuccessEval ev;
  ev.episodes = n_targets;
  for (int i = 0; i < n_targets; ++i) {
    Observation obs = env.reset();
    while (env.episode_active()) {
      const StepResult r = env.step(policy(obs));
      obs = r.observation;
      if (r.terminated) {
        ++ev.successes;
        break;
      }
    }
  }
  ev.rate = static_cast<double>(ev.successes) / static_cast<double>(n_targets);
  return ev;
}

}  // namespace armtune
