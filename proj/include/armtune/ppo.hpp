#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "armtune/arm_env.hpp"
#include "armtune/autodiff.hpp"
#include "armtune/distributions.hpp"
#include "armtune/errors.hpp"
#include "armtune/mlp.hpp"
#include "armtune/rng.hpp"

namespace armtune {

struct PPOConfig {
  double learning_rate = 3e-4;
  int n_steps = 2048;
  int batch_size = 64;
  double gamma = 0.99;
  double ent_coef = 0.0;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  double gae_lambda = 0.95;
  double clip_range = 0.2;
  int n_epochs = 10;
  bool normalize_advantage = true;
  std::vector<int> net_arch = {64, 64};

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("PPOConfig: gamma must be in (0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw UsageError("PPOConfig: gae_lambda must be in [0, 1]");
    if (!(clip_range > 0.0)) throw UsageError("PPOConfig: clip_range must be > 0");
    if (n_steps < 1) throw UsageError("PPOConfig: n_steps must be >= 1");
    if (batch_size < 1 || batch_size > n_steps) throw UsageError("PPOConfig: need 1 <= batch_size <= n_steps");
    if (n_epochs < 1) throw UsageError("PPOConfig: n_epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw UsageError("PPOConfig: learning_rate must be > 0");
    if (!(max_grad_norm > 0.0)) throw UsageError("PPOConfig: max_grad_norm must be > 0");
  }
};

// One on-policy collection: exactly n_steps transitions, episodes auto-reset.
struct RolloutBuffer {
  Eigen::MatrixXd obs;      // obs_dim x n
  Eigen::MatrixXd actions;  // act_dim x n, pre-clip Gaussian samples
  Eigen::VectorXd rewards;
  Eigen::VectorXd dones;  // 1.0 where the episode ended at this step
  Eigen::VectorXd values;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  double bootstrap_value = 0.0;
  bool advantages_ready = false;

  int size() const { return static_cast<int>(rewards.size()); }
};

// Backward GAE recursion; done flags cut bootstrapping. returns = adv + values.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> compute_gae(const Eigen::VectorXd& rewards,
                                                               const Eigen::VectorXd& values,
                                                               const Eigen::VectorXd& dones, double bootstrap_value,
                                                               double gamma, double gae_lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || dones.size() != n) throw UsageError("compute_gae: input lengths differ");
  Eigen::VectorXd adv(n), ret(n);
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double not_done = 1.0 - dones[t];
    const double next_value = (t == n - 1) ? bootstrap_value : values[t + 1];
    const double delta = rewards[t] + gamma * next_value * not_done - values[t];
    running = delta + gamma * gae_lambda * not_done * running;
    adv[t] = running;
    ret[t] = adv[t] + values[t];
  }
  return {std::move(adv), std::move(ret)};
}

// Per-sample clipped surrogate: min(ratio*adv, clip(ratio, 1-eps, 1+eps)*adv).
inline double ppo_clipped_objective(double advantage, double ratio, double clip_range) {
  const double clipped = std::clamp(ratio, 1.0 - clip_range, 1.0 + clip_range);
  return std::min(ratio * advantage, clipped * advantage);
}

struct PPOLossStats {
  double policy_objective = 0.0;  // mean clipped surrogate over the last minibatch
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  double first_ratio_mean = 0.0;      // diagnostics from the first minibatch of the first epoch
  double first_clip_objective = 0.0;  // clipped surrogate there; zero-mean advantages make it 0
  int minibatch_updates = 0;
};

class PPOAgent {
 public:
  PPOAgent(PPOConfig config, std::uint64_t seed, int obs_dim = kObservationDim, int act_dim = kNumJoints)
      : cfg_(std::move(config)),
        obs_dim_(obs_dim),
        act_dim_(act_dim),
        act_rng_(seed, Rng::stream_id("ppo-act")),
        shuffle_rng_(seed, Rng::stream_id("ppo-shuffle")) {
    cfg_.validate();
    Rng init(seed, Rng::stream_id("ppo-init"));
    MlpSpec pi_spec{obs_dim_, cfg_.net_arch, act_dim_, Activation::kTanh};
    MlpSpec vf_spec{obs_dim_, cfg_.net_arch, 1, Activation::kTanh};
    policy_ = make_mlp_params(pi_spec, init, 0.01);
    value_ = make_mlp_params(vf_spec, init, 1.0);
    log_std_ = Eigen::VectorXd::Zero(act_dim_);
    opt_policy_ = make_adam_state(policy_.flat.size());
    opt_value_ = make_adam_state(value_.flat.size());
    opt_log_std_ = make_adam_state(log_std_.size());
  }

  struct ActionSample {
    Eigen::VectorXd raw;                     // Gaussian sample stored for training
    std::array<double, kNumJoints> exec{};  // clamped to [-1, 1] for the env
    double log_prob = 0.0;
    double value = 0.0;
  };

  ActionSample sample_action(const Eigen::VectorXd& obs) {
    ActionSample s;
    const Eigen::VectorXd mean = mlp_forward(policy_, obs);
    s.raw.resize(act_dim_);
    for (int i = 0; i < act_dim_; ++i) s.raw[i] = mean[i] + std::exp(log_std_[i]) * act_rng_.normal();
    s.log_prob = diag_gaussian_log_prob_grouped(mean, log_std_, s.raw);
    s.value = mlp_forward(value_, obs)[0];
    for (int i = 0; i < act_dim_; ++i) s.exec[i] = std::clamp(s.raw[i], -1.0, 1.0);
    return s;
  }

  std::array<double, kNumJoints> act(const Observation& obs, bool deterministic) {
    const auto flat = obs.flatten();
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());
    if (deterministic) {
      const Eigen::VectorXd mean = mlp_forward(policy_, v);
      std::array<double, kNumJoints> a{};
      for (int i = 0; i < act_dim_; ++i) a[i] = std::clamp(mean[i], -1.0, 1.0);
      return a;
    }
    return sample_action(v).exec;
  }

  // Fires on_episode(total_reward, length, terminated) at each episode end.
  using EpisodeCallback = std::function<void(double, int, bool)>;

  RolloutBuffer collect_rollout(ReachEnv& env, int n_steps, const EpisodeCallback& on_episode = {}) {
    if (n_steps < 1) throw UsageError("collect_rollout: n_steps must be >= 1");
    RolloutBuffer buf;
    buf.obs.resize(obs_dim_, n_steps);
    buf.actions.resize(act_dim_, n_steps);
    buf.rewards.resize(n_steps);
    buf.dones.resize(n_steps);
    buf.values.resize(n_steps);
    buf.log_probs.resize(n_steps);
    if (!env.episode_active()) {
      env.reset();
      episode_reward_ = 0.0;
      episode_length_ = 0;
    }
    Observation obs = env.observation();
    for (int t = 0; t < n_steps; ++t) {
      const auto flat = obs.flatten();
      const Eigen::VectorXd obs_vec = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());
      ActionSample s = sample_action(obs_vec);
      const StepResult r = env.step(s.exec);
      buf.obs.col(t) = obs_vec;
      buf.actions.col(t) = s.raw;
      buf.rewards[t] = r.reward;
      buf.dones[t] = (r.terminated || r.truncated) ? 1.0 : 0.0;
      buf.values[t] = s.value;
      buf.log_probs[t] = s.log_prob;
      episode_reward_ += r.reward;
      episode_length_ += 1;
      if (r.terminated || r.truncated) {
        if (on_episode) on_episode(episode_reward_, episode_length_, r.terminated);
        obs = env.reset();
        episode_reward_ = 0.0;
        episode_length_ = 0;
      } else {
        obs = r.observation;
      }
    }
    const auto flat = obs.flatten();
    buf.bootstrap_value = mlp_forward(value_, Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size()))[0];
    return buf;
  }

  PPOLossStats update(RolloutBuffer& buf) {
    auto [adv, ret] = compute_gae(buf.rewards, buf.values, buf.dones, buf.bootstrap_value, cfg_.gamma, cfg_.gae_lambda);
    buf.advantages = std::move(adv);
    buf.returns = std::move(ret);
    buf.advantages_ready = true;

    const int n = buf.size();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    PPOLossStats stats;
    bool first_minibatch = true;
    for (int epoch = 0; epoch < cfg_.n_epochs; ++epoch) {
      // Fisher-Yates with the agent's shuffle stream.
      for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(shuffle_rng_.uniform_int(0, i));
        std::swap(order[i], order[j]);
      }
      for (int start = 0; start < n; start += cfg_.batch_size) {
        const int m = std::min(cfg_.batch_size, n - start);  // remainder minibatch kept
        Eigen::MatrixXd mb_obs(obs_dim_, m), mb_act(act_dim_, m);
        Eigen::MatrixXd mb_oldlp(1, m), mb_adv(1, m), mb_ret(1, m);
        for (int k = 0; k < m; ++k) {
          const int idx = order[start + k];
          mb_obs.col(k) = buf.obs.col(idx);
          mb_act.col(k) = buf.actions.col(idx);
          mb_oldlp(0, k) = buf.log_probs[idx];
          mb_adv(0, k) = buf.advantages[idx];
          mb_ret(0, k) = buf.returns[idx];
        }
        if (cfg_.normalize_advantage) {
          const double mean = mb_adv.mean();
          double var = 0.0;
          for (int k = 0; k < m; ++k) var += (mb_adv(0, k) - mean) * (mb_adv(0, k) - mean);
          const double std = m > 1 ? std::sqrt(var / (m - 1)) : 0.0;
          mb_adv = (mb_adv.array() - mean) / (std + 1e-8);
        }

        ad::Tape tape;
        const int pi_slot = tape.register_params(&policy_.flat);
        const int vf_slot = tape.register_params(&value_.flat);
        const int ls_slot = tape.register_params(&log_std_);

        const ad::Value obs_node = tape.constant(mb_obs);
        const ad::Value mean_node = tape.mlp(pi_slot, policy_, obs_node);
        const ad::Value ls_vec = tape.param_segment(ls_slot, 0, act_dim_);
        const ad::Value ls_b = tape.broadcast_col(ls_vec, m);
        const ad::Value z =
            tape.mul(tape.sub(tape.constant(mb_act), mean_node), tape.exp(tape.scale(ls_b, -1.0)));
        const ad::Value log_prob =
            tape.add_scalar(tape.sub(tape.scale(tape.colsum(tape.square(z)), -0.5), tape.colsum(ls_b)),
                            -0.5 * static_cast<double>(act_dim_) * kLog2Pi);
        const ad::Value ratio = tape.exp(tape.sub(log_prob, tape.constant(mb_oldlp)));
        const ad::Value adv_node = tape.constant(mb_adv);
        const ad::Value surr1 = tape.mul(ratio, adv_node);
        const ad::Value surr2 = tape.mul(tape.clip(ratio, 1.0 - cfg_.clip_range, 1.0 + cfg_.clip_range), adv_node);
        const ad::Value policy_objective = tape.mean(tape.min(surr1, surr2));

        const ad::Value v_node = tape.mlp(vf_slot, value_, obs_node);
        const ad::Value value_loss = tape.mean(tape.square(tape.sub(v_node, tape.constant(mb_ret))));

        const ad::Value entropy = tape.add_scalar(tape.colsum(ls_vec),
                                                  0.5 * static_cast<double>(act_dim_) * (1.0 + kLog2Pi));

        const ad::Value loss =
            tape.add(tape.add(tape.scale(policy_objective, -1.0), tape.scale(value_loss, cfg_.vf_coef)),
                     tape.scale(entropy, -cfg_.ent_coef));

        const double loss_value = tape.scalar(loss);
        if (!std::isfinite(loss_value)) {
          throw NumericError("ppo_update: non-finite loss (policy_objective=" +
                             std::to_string(tape.scalar(policy_objective)) +
                             ", value_loss=" + std::to_string(tape.scalar(value_loss)) + ")");
        }
        tape.backward(loss);

        Eigen::VectorXd g_pi = tape.grad(pi_slot);
        Eigen::VectorXd g_vf = tape.grad(vf_slot);
        Eigen::VectorXd g_ls = tape.grad(ls_slot);
        const double norm = std::sqrt(g_pi.squaredNorm() + g_vf.squaredNorm() + g_ls.squaredNorm());
        if (norm > cfg_.max_grad_norm) {
          const double f = cfg_.max_grad_norm / norm;
          g_pi *= f;
          g_vf *= f;
          g_ls *= f;
        }
        adam_step(policy_.flat, g_pi, opt_policy_, cfg_.learning_rate);
        adam_step(value_.flat, g_vf, opt_value_, cfg_.learning_rate);
        adam_step(log_std_, g_ls, opt_log_std_, cfg_.learning_rate);

        if (first_minibatch) {
          stats.first_ratio_mean = tape.value(ratio).mean();
          stats.first_clip_objective = tape.scalar(policy_objective);
          first_minibatch = false;
        }
        stats.policy_objective = tape.scalar(policy_objective);
        stats.value_loss = tape.scalar(value_loss);
        stats.entropy = tape.scalar(entropy);
        stats.total_loss = loss_value;
        stats.minibatch_updates += 1;
      }
    }
    return stats;
  }

  const PPOConfig& config() const { return cfg_; }
  const MlpParams& policy() const { return policy_; }
  const MlpParams& value_net() const { return value_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  Eigen::VectorXd& log_std() { return log_std_; }
  MlpParams& policy() { return policy_; }
  MlpParams& value_net() { return value_; }
  AdamState& policy_opt() { return opt_policy_; }
  AdamState& value_opt() { return opt_value_; }
  AdamState& log_std_opt() { return opt_log_std_; }
  const AdamState& policy_opt() const { return opt_policy_; }
  const AdamState& value_opt() const { return opt_value_; }
  const AdamState& log_std_opt() const { return opt_log_std_; }

 private:
  PPOConfig cfg_;
  int obs_dim_;
  int act_dim_;
  MlpParams policy_;
  MlpParams value_;
  Eigen::VectorXd log_std_;
  AdamState opt_policy_;
  AdamState opt_value_;
  AdamState opt_log_std_;
  Rng act_rng_;
  Rng shuffle_rng_;
  double episode_reward_ = 0.0;
  int episode_length_ = 0;
};

}  // namespace armtune
