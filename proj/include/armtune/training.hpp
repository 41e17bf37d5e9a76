#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "armtune/arm_env.hpp"
#include "armtune/checkpoint.hpp"
#include "armtune/errors.hpp"
#include "armtune/hyperparams.hpp"
#include "armtune/ppo.hpp"
#include "armtune/presets.hpp"
#include "armtune/sac.hpp"

namespace armtune {

struct EpisodeRecord {
  int episode = 0;  // 1-based
  double reward = 0.0;
  int length = 0;
  bool success = false;
};

using EpisodeSink = std::function<void(const EpisodeRecord&)>;

// Owns one env and one agent; the env, network init, and sampling streams all
// derive from the same trial seed but never interleave.
class Trainer {
 public:
  Trainer(Algo algo, ParamMap params, const ArmModel& model, EnvConfig env_config, std::uint64_t seed)
      : algo_(algo), params_(std::move(params)), seed_(seed), env_(model, env_config, seed) {
    if (algo_ == Algo::kPpo) {
      ppo_.emplace(ppo_config_from_params(params_), seed);
    } else {
      sac_.emplace(sac_config_from_params(params_), seed);
    }
  }

  // Trains until `episodes` more episodes have completed, reporting each one.
  void train_episodes(int episodes, const EpisodeSink& sink = {}) {
    if (episodes < 1) return;
    const int target = episodes_done_ + episodes;
    if (ppo_) {
      while (episodes_done_ < target) {
        auto buf = ppo_->collect_rollout(env_, ppo_->config().n_steps, [&](double reward, int length, bool success) {
          if (episodes_done_ < target) {
            ++episodes_done_;
            if (sink) sink({episodes_done_, reward, length, success});
          }
        });
        ppo_->update(buf);
      }
    } else {
      while (episodes_done_ < target) {
        env_.reset();
        sac_->on_episode_start();
        double reward = 0.0;
        int length = 0;
        bool success = false;
        while (env_.episode_active()) {
          const SACStepReport rep = sac_->train_step(env_);
          reward += rep.env_step.reward;
          ++length;
          success = rep.env_step.terminated;
        }
        ++episodes_done_;
        if (sink) sink({episodes_done_, reward, length, success});
      }
    }
  }

  std::array<double, kNumJoints> act(const Observation& obs, bool deterministic) {
    return ppo_ ? ppo_->act(obs, deterministic) : sac_->act(obs, deterministic);
  }

  Checkpoint make_checkpoint() const {
    Checkpoint cp;
    cp.algo = to_string(algo_);
    cp.params = params_;
    cp.seed = seed_;
    cp.episodes_at_save = episodes_done_;
    if (ppo_) {
      cp.specs = {{"policy", ppo_->policy().spec}, {"value", ppo_->value_net().spec}};
      cp.tensors = {{"policy", ppo_->policy().flat},
                    {"value", ppo_->value_net().flat},
                    {"log_std", ppo_->log_std()}};
      cp.adam_states = {{"policy", ppo_->policy_opt()}, {"value", ppo_->value_opt()}, {"log_std", ppo_->log_std_opt()}};
    } else {
      cp.specs = {{"actor", sac_->actor().spec}, {"q1", sac_->q1().spec}, {"q2", sac_->q2().spec}};
      cp.tensors = {{"actor", sac_->actor().flat},
                    {"q1", sac_->q1().flat},
                    {"q2", sac_->q2().flat},
                    {"target_q1", sac_->target_q1().flat},
                    {"target_q2", sac_->target_q2().flat}};
      cp.adam_states = {{"actor", sac_->actor_opt()}, {"q1", sac_->q1_opt()}, {"q2", sac_->q2_opt()}};
    }
    return cp;
  }

  Algo algo() const { return algo_; }
  const ParamMap& params() const { return params_; }
  int episodes_done() const { return episodes_done_; }
  ReachEnv& env() { return env_; }
  PPOAgent* ppo() { return ppo_ ? &*ppo_ : nullptr; }
  SACAgent* sac() { return sac_ ? &*sac_ : nullptr; }

 private:
  Algo algo_;
  ParamMap params_;
  std::uint64_t seed_;
  ReachEnv env_;
  std::optional<PPOAgent> ppo_;
  std::optional<SACAgent> sac_;
  int episodes_done_ = 0;
};

// Deterministic policy closure for evaluation.
using PolicyFn = std::function<std::array<double, kNumJoints>(const Observation&)>;

inline PolicyFn policy_from_checkpoint(const Checkpoint& cp) {
  if (cp.algo == "ppo") {
    MlpParams policy;
    policy.spec = cp.spec("policy");
    policy.layers = layer_layout(policy.spec);
    policy.flat = cp.tensor("policy");
    if (policy.flat.size() != policy.layers.back().b_offset + policy.layers.back().out) {
      throw IoError("checkpoint: policy tensor size does not match its spec");
    }
    return [policy = std::move(policy)](const Observation& obs) {
      const auto flat = obs.flatten();
      const Eigen::VectorXd mean = mlp_forward(policy, Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size()));
      std::array<double, kNumJoints> a{};
      for (int i = 0; i < kNumJoints; ++i) a[i] = std::clamp(mean[i], -1.0, 1.0);
      return a;
    };
  }
  if (cp.algo == "sac") {
    MlpParams actor;
    actor.spec = cp.spec("actor");
    actor.layers = layer_layout(actor.spec);
    actor.flat = cp.tensor("actor");
    if (actor.flat.size() != actor.layers.back().b_offset + actor.layers.back().out) {
      throw IoError("checkpoint: actor tensor size does not match its spec");
    }
    return [actor = std::move(actor)](const Observation& obs) {
      const auto flat = obs.flatten();
      const Eigen::VectorXd out = mlp_forward(actor, Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size()));
      std::array<double, kNumJoints> a{};
      for (int i = 0; i < kNumJoints; ++i) a[i] = std::tanh(out[i]);
      return a;
    };
  }
  throw IoError("checkpoint: unknown algo '" + cp.algo + "'");
}

}  // namespace armtune
