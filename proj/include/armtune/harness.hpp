#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "armtune/checkpoint.hpp"
#include "armtune/errors.hpp"
#include "armtune/metrics.hpp"
#include "armtune/training.hpp"

namespace armtune {

struct TrainFullResult {
  std::vector<CurvePoint> curve;
  std::vector<std::string> checkpoint_paths;
  std::string curve_path;
};

// Full training run: one CurvePoint per episode, a checkpoint at every
// milestone and one at the end. On numeric failure the curve collected so far
// is flushed before the error propagates.
inline TrainFullResult train_full(Algo algo, const ParamMap& params, const ArmModel& model, int episodes,
                                  const std::vector<int>& milestones, std::uint64_t seed,
                                  const std::string& out_dir) {
  for (int m : milestones) {
    if (m < 1 || m > episodes) {
      throw UsageError("checkpoint milestone " + std::to_string(m) + " outside [1, " + std::to_string(episodes) + "]");
    }
  }
  std::filesystem::create_directories(out_dir);
  TrainFullResult result;
  result.curve_path = out_dir + "/curve.csv";
  result.curve.reserve(episodes);
  const std::set<int> milestone_set(milestones.begin(), milestones.end());

  Trainer trainer(algo, params, model, default_env_config(model, 50), seed);
  auto save_at = [&](int episode) {
    const std::string path = out_dir + "/checkpoint_" + std::to_string(episode) + ".ckpt";
    save_checkpoint(path, trainer.make_checkpoint());
    result.checkpoint_paths.push_back(path);
  };
  try {
    trainer.train_episodes(episodes, [&](const EpisodeRecord& e) {
      result.curve.push_back({e.episode, e.reward, e.length, e.success});
      if (milestone_set.count(e.episode) > 0 && e.episode != episodes) save_at(e.episode);
    });
  } catch (const NumericError&) {
    write_curve_csv(result.curve_path, result.curve);
    throw;
  }
  save_at(episodes);
  write_curve_csv(result.curve_path, result.curve);
  return result;
}

// Success rate of a saved checkpoint against freshly sampled targets.
inline SuccessEval evaluate_checkpoint(const std::string& checkpoint_path, const ArmModel& model, int n_targets,
                                       int max_steps, std::uint64_t seed) {
  const Checkpoint cp = load_checkpoint(checkpoint_path);
  const PolicyFn policy = policy_from_checkpoint(cp);
  return evaluate_success(policy, model, default_env_config(model, max_steps), n_targets, seed);
}

}  // namespace armtune
