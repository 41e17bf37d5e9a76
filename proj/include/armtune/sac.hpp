#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
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

struct SACConfig {
  int buffer_size = 1'000'000;
  int learning_starts = 1000;
  int batch_size = 256;
  double tau = 0.005;
  double gamma = 0.99;
  double learning_rate = 3e-4;
  double ent_coef = 0.2;  // fixed temperature
  int target_update_interval = 1;
  int gradient_steps = 1;
  bool use_sde = false;  // episode-frozen exploration noise when set
  std::vector<int> net_arch = {32, 32};  // desk-scale width; see README on network sizing

  void validate() const {
    if (!(tau > 0.0 && tau <= 1.0)) throw UsageError("SACConfig: tau must be in (0, 1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("SACConfig: gamma must be in (0, 1)");
    if (buffer_size < 1) throw UsageError("SACConfig: buffer_size must be >= 1");
    if (learning_starts > buffer_size) throw UsageError("SACConfig: learning_starts must be <= buffer_size");
    if (batch_size < 1) throw UsageError("SACConfig: batch_size must be >= 1");
    if (gradient_steps < 1) throw UsageError("SACConfig: gradient_steps must be >= 1");
    if (target_update_interval < 1) throw UsageError("SACConfig: target_update_interval must be >= 1");
    if (!(learning_rate > 0.0)) throw UsageError("SACConfig: learning_rate must be > 0");
    if (ent_coef < 0.0) throw UsageError("SACConfig: ent_coef must be >= 0");
  }
};

struct Transition {
  std::array<double, kObservationDim> obs{};
  std::array<double, kNumJoints> action{};
  double reward = 0.0;
  std::array<double, kObservationDim> next_obs{};
  bool terminated = false;  // truncation stores false so bootstrapping continues
};

// Fixed-capacity ring buffer, strict FIFO overwrite.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw UsageError("ReplayBuffer: capacity must be >= 1");
  }

  void push(const Transition& t) {
    if (static_cast<int>(data_.size()) < capacity_) {
      data_.push_back(t);
    } else {
      data_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
    ++total_pushes_;
  }

  int size() const { return static_cast<int>(data_.size()); }
  int capacity() const { return capacity_; }
  std::int64_t total_pushes() const { return total_pushes_; }
  const Transition& operator[](int i) const { return data_[i]; }

 private:
  int capacity_;
  std::vector<Transition> data_;
  int cursor_ = 0;
  std::int64_t total_pushes_ = 0;
};

// Uniform-with-replacement indices, deterministic under seed.
inline std::vector<int> replay_sample_indices(const ReplayBuffer& buffer, int batch_size, Rng& rng) {
  if (buffer.size() < batch_size) {
    throw UsageError("replay_sample: buffer holds " + std::to_string(buffer.size()) + " < batch of " +
                     std::to_string(batch_size));
  }
  std::vector<int> idx(batch_size);
  for (int& i : idx) i = static_cast<int>(rng.uniform_int(0, buffer.size() - 1));
  return idx;
}

struct ReplayBatch {
  Eigen::MatrixXd obs;       // obs_dim x m
  Eigen::MatrixXd actions;   // act_dim x m
  Eigen::VectorXd rewards;   // m
  Eigen::MatrixXd next_obs;  // obs_dim x m
  Eigen::VectorXd terminated;  // m, 1.0 where terminal
};

inline ReplayBatch replay_sample(const ReplayBuffer& buffer, int batch_size, Rng& rng) {
  const std::vector<int> idx = replay_sample_indices(buffer, batch_size, rng);
  ReplayBatch b;
  b.obs.resize(kObservationDim, batch_size);
  b.actions.resize(kNumJoints, batch_size);
  b.rewards.resize(batch_size);
  b.next_obs.resize(kObservationDim, batch_size);
  b.terminated.resize(batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const Transition& t = buffer[idx[k]];
    b.obs.col(k) = Eigen::Map<const Eigen::VectorXd>(t.obs.data(), kObservationDim);
    b.actions.col(k) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), kNumJoints);
    b.rewards[k] = t.reward;
    b.next_obs.col(k) = Eigen::Map<const Eigen::VectorXd>(t.next_obs.data(), kObservationDim);
    b.terminated[k] = t.terminated ? 1.0 : 0.0;
  }
  return b;
}

struct SACStepReport {
  StepResult env_step;
  int gradient_iterations = 0;  // performed during this call
  double critic_loss = 0.0;   // last iteration's values
  double actor_loss = 0.0;
};

class SACAgent {
 public:
  SACAgent(SACConfig config, std::uint64_t seed, int obs_dim = kObservationDim, int act_dim = kNumJoints)
      : cfg_(std::move(config)),
        obs_dim_(obs_dim),
        act_dim_(act_dim),
        buffer_(cfg_.buffer_size),
        act_rng_(seed, Rng::stream_id("sac-act")),
        update_rng_(seed, Rng::stream_id("sac-update")),
        replay_rng_(seed, Rng::stream_id("sac-replay")) {
    cfg_.validate();
    Rng init(seed, Rng::stream_id("sac-init"));
    MlpSpec actor_spec{obs_dim_, cfg_.net_arch, 2 * act_dim_, Activation::kRelu};
    MlpSpec critic_spec{obs_dim_ + act_dim_, cfg_.net_arch, 1, Activation::kRelu};
    actor_ = make_mlp_params(actor_spec, init, 0.01);
    q1_ = make_mlp_params(critic_spec, init, 1.0);
    q2_ = make_mlp_params(critic_spec, init, 1.0);
    target_q1_ = q1_;
    target_q2_ = q2_;
    opt_actor_ = make_adam_state(actor_.flat.size());
    opt_q1_ = make_adam_state(q1_.flat.size());
    opt_q2_ = make_adam_state(q2_.flat.size());
    sde_noise_ = Eigen::VectorXd::Zero(act_dim_);
  }

  // Splits the actor head into mean and clamped log-std.
  struct PolicyHead {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
  };

  PolicyHead policy_head(const Eigen::VectorXd& obs) const {
    const Eigen::VectorXd out = mlp_forward(actor_, obs);
    PolicyHead h;
    h.mean = out.head(act_dim_);
    h.log_std = out.tail(act_dim_).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    return h;
  }

  std::array<double, kNumJoints> act(const Observation& obs, bool deterministic) {
    const auto flat = obs.flatten();
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());
    const PolicyHead h = policy_head(v);
    std::array<double, kNumJoints> a{};
    if (deterministic) {
      for (int i = 0; i < act_dim_; ++i) a[i] = std::tanh(h.mean[i]);
      return a;
    }
    const SquashedSample s = squashed_sample_and_log_prob(h.mean, h.log_std, act_rng_);
    for (int i = 0; i < act_dim_; ++i) a[i] = s.action[i];
    return a;
  }

  // Resamples the episode-frozen exploration noise; call at episode start.
  void on_episode_start() {
    for (int i = 0; i < act_dim_; ++i) sde_noise_[i] = act_rng_.normal();
  }

  // One env interaction plus the configured gradient iterations.
  SACStepReport train_step(ReachEnv& env) {
    std::array<double, kNumJoints> action{};
    const Observation obs = env.observation();
    const auto obs_flat = obs.flatten();
    if (total_env_steps_ < cfg_.learning_starts) {
      for (int i = 0; i < act_dim_; ++i) action[i] = act_rng_.uniform(-1.0, 1.0);
    } else {
      const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(obs_flat.data(), obs_flat.size());
      const PolicyHead h = policy_head(v);
      const SquashedSample s = cfg_.use_sde ? squashed_from_noise(h.mean, h.log_std, sde_noise_)
                                            : squashed_sample_and_log_prob(h.mean, h.log_std, act_rng_);
      for (int i = 0; i < act_dim_; ++i) action[i] = s.action[i];
    }

    SACStepReport report;
    report.env_step = env.step(action);
    ++total_env_steps_;

    Transition t;
    t.obs = obs_flat;
    t.action = action;
    t.reward = report.env_step.reward;
    t.next_obs = report.env_step.observation.flatten();
    t.terminated = report.env_step.terminated;
    buffer_.push(t);

    if (total_env_steps_ >= cfg_.learning_starts && buffer_.size() >= cfg_.batch_size) {
      for (int g = 0; g < cfg_.gradient_steps; ++g) {
        const ReplayBatch batch = replay_sample(buffer_, cfg_.batch_size, replay_rng_);
        report.critic_loss = critic_update(batch);
        report.actor_loss = actor_update(batch);
        ++grad_iterations_;
        ++report.gradient_iterations;
        if (grad_iterations_ % cfg_.target_update_interval == 0) {
          soft_update(q1_.flat, target_q1_.flat, cfg_.tau);
          soft_update(q2_.flat, target_q2_.flat, cfg_.tau);
        }
      }
    }
    return report;
  }

  // Entropy-regularized Bellman target, fresh next actions from the actor.
  Eigen::VectorXd critic_targets(const ReplayBatch& batch) {
    const int m = static_cast<int>(batch.rewards.size());
    const Eigen::MatrixXd head = mlp_forward_batch(actor_, batch.next_obs);
    Eigen::MatrixXd next_in(obs_dim_ + act_dim_, m);
    next_in.topRows(obs_dim_) = batch.next_obs;
    Eigen::VectorXd next_logp(m);
    for (int k = 0; k < m; ++k) {
      const Eigen::VectorXd mean = head.col(k).head(act_dim_);
      const Eigen::VectorXd log_std = head.col(k).tail(act_dim_).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
      Eigen::VectorXd noise(act_dim_);
      for (int i = 0; i < act_dim_; ++i) noise[i] = update_rng_.normal();
      const SquashedSample s = squashed_from_noise(mean, log_std, noise);
      next_in.col(k).tail(act_dim_) = s.action;
      next_logp[k] = s.log_prob;
    }
    const Eigen::MatrixXd tq1 = mlp_forward_batch(target_q1_, next_in);
    const Eigen::MatrixXd tq2 = mlp_forward_batch(target_q2_, next_in);
    Eigen::VectorXd y(m);
    for (int k = 0; k < m; ++k) {
      const double min_q = std::min(tq1(0, k), tq2(0, k));
      y[k] = batch.rewards[k] +
             cfg_.gamma * (1.0 - batch.terminated[k]) * (min_q - cfg_.ent_coef * next_logp[k]);
      if (!std::isfinite(y[k])) throw NumericError("critic_update: non-finite target at batch index " + std::to_string(k));
    }
    return y;
  }

  // Both critics regress to the shared target by MSE; one Adam step each.
  double critic_update(const ReplayBatch& batch) {
    const Eigen::VectorXd y = critic_targets(batch);
    const int m = static_cast<int>(batch.rewards.size());
    Eigen::MatrixXd q_in(obs_dim_ + act_dim_, m);
    q_in.topRows(obs_dim_) = batch.obs;
    q_in.bottomRows(act_dim_) = batch.actions;
    Eigen::MatrixXd y_row = y.transpose();

    double total = 0.0;
    for (auto [net, opt] : {std::pair{&q1_, &opt_q1_}, std::pair{&q2_, &opt_q2_}}) {
      ad::Tape tape;
      const int slot = tape.register_params(&net->flat);
      const ad::Value pred = tape.mlp(slot, *net, tape.constant(q_in));
      const ad::Value loss = tape.mean(tape.square(tape.sub(pred, tape.constant(y_row))));
      const double loss_value = tape.scalar(loss);
      if (!std::isfinite(loss_value)) throw NumericError("critic_update: non-finite loss");
      tape.backward(loss);
      adam_step(net->flat, tape.grad(slot), *opt, cfg_.learning_rate);
      total += loss_value;
    }
    return total;
  }

  // loss = mean(alpha * log pi(a|s) - min Q(s, a)), reparameterized actions.
  double actor_update(const ReplayBatch& batch) {
    const int m = static_cast<int>(batch.rewards.size());
    Eigen::MatrixXd noise(act_dim_, m);
    for (int k = 0; k < m; ++k) {
      for (int i = 0; i < act_dim_; ++i) noise(i, k) = update_rng_.normal();
    }

    ad::Tape tape;
    const int actor_slot = tape.register_params(&actor_.flat);
    const int q1_slot = tape.register_params(&q1_.flat, /*want_grad=*/false);
    const int q2_slot = tape.register_params(&q2_.flat, /*want_grad=*/false);

    const ad::Value obs_node = tape.constant(batch.obs);
    const ad::Value head = tape.mlp(actor_slot, actor_, obs_node);
    const ad::Value mean = tape.rows(head, 0, act_dim_);
    const ad::Value log_std = tape.clip(tape.rows(head, act_dim_, act_dim_), kLogStdMin, kLogStdMax);
    const ad::Value std_node = tape.exp(log_std);
    const ad::Value u = tape.add(mean, tape.mul(std_node, tape.constant(noise)));
    const ad::Value a = tape.tanh(u);

    const ad::Value z = tape.mul(tape.sub(u, mean), tape.exp(tape.scale(log_std, -1.0)));
    const ad::Value gauss_lp =
        tape.add_scalar(tape.sub(tape.scale(tape.colsum(tape.square(z)), -0.5), tape.colsum(log_std)),
                        -0.5 * static_cast<double>(act_dim_) * kLog2Pi);
    const ad::Value correction =
        tape.colsum(tape.log(tape.add_scalar(tape.scale(tape.square(a), -1.0), 1.0 + kSquashEps)));
    const ad::Value log_prob = tape.sub(gauss_lp, correction);

    const ad::Value q_in = tape.vstack(obs_node, a);
    const ad::Value q1v = tape.mlp(q1_slot, q1_, q_in);
    const ad::Value q2v = tape.mlp(q2_slot, q2_, q_in);
    const ad::Value q_min = tape.min(q1v, q2v);

    const ad::Value loss = tape.mean(tape.sub(tape.scale(log_prob, cfg_.ent_coef), q_min));
    const double loss_value = tape.scalar(loss);
    if (!std::isfinite(loss_value)) throw NumericError("actor_update: non-finite loss");
    tape.backward(loss);
    adam_step(actor_.flat, tape.grad(actor_slot), opt_actor_, cfg_.learning_rate);
    return loss_value;
  }

  const SACConfig& config() const { return cfg_; }
  const Eigen::VectorXd& sde_noise() const { return sde_noise_; }
  ReplayBuffer& replay_buffer() { return buffer_; }
  const ReplayBuffer& replay_buffer() const { return buffer_; }
  std::int64_t total_env_steps() const { return total_env_steps_; }
  std::int64_t grad_iterations() const { return grad_iterations_; }

  MlpParams& actor() { return actor_; }
  MlpParams& q1() { return q1_; }
  MlpParams& q2() { return q2_; }
  MlpParams& target_q1() { return target_q1_; }
  MlpParams& target_q2() { return target_q2_; }
  const MlpParams& actor() const { return actor_; }
  const MlpParams& q1() const { return q1_; }
  const MlpParams& q2() const { return q2_; }
  const MlpParams& target_q1() const { return target_q1_; }
  const MlpParams& target_q2() const { return target_q2_; }
  AdamState& actor_opt() { return opt_actor_; }
  AdamState& q1_opt() { return opt_q1_; }
  AdamState& q2_opt() { return opt_q2_; }
  const AdamState& actor_opt() const { return opt_actor_; }
  const AdamState& q1_opt() const { return opt_q1_; }
  const AdamState& q2_opt() const { return opt_q2_; }

 private:
  SACConfig cfg_;
  int obs_dim_;
  int act_dim_;
  MlpParams actor_, q1_, q2_, target_q1_, target_q2_;
  AdamState opt_actor_, opt_q1_, opt_q2_;
  ReplayBuffer buffer_;
  Rng act_rng_;
  Rng update_rng_;
  Rng replay_rng_;
  Eigen::VectorXd sde_noise_;
  std::int64_t total_env_steps_ = 0;
  std::int64_t grad_iterations_ = 0;
};

}  // namespace armtune
