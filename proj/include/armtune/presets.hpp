#pragma once

#include <string>

#include "armtune/errors.hpp"
#include "armtune/hyperparams.hpp"
#include "armtune/ppo.hpp"
#include "armtune/sac.hpp"
#include "armtune/tpe.hpp"

namespace armtune {

enum class Algo : std::uint8_t { kPpo = 0, kSac = 1 };

inline std::string to_string(Algo a) { return a == Algo::kPpo ? "ppo" : "sac"; }

inline Algo algo_from_string(const std::string& s) {
  if (s == "ppo") return Algo::kPpo;
  if (s == "sac") return Algo::kSac;
  throw UsageError("unknown algorithm '" + s + "', expected ppo or sac");
}

// 9-dimension PPO search space. Strictly positive parameters spanning two or
// more decades sample on a log scale; gamma stays linear, matching the stated
// range endpoints directly.
inline SearchSpace ppo_search_space() {
  SearchSpace s;
  s.domains = {
      {"learning_rate", DomainKind::kLogUniform, 1e-5, 1e-1, {}},
      {"n_steps", DomainKind::kIntUniform, 64, 4096, {}},
      {"batch_size", DomainKind::kIntUniform, 16, 256, {}},
      {"gamma", DomainKind::kUniform, 0.95, 0.999, {}},
      {"ent_coef", DomainKind::kUniform, 0.0, 0.1, {}},
      {"vf_coef", DomainKind::kUniform, 0.2, 1.0, {}},
      {"max_grad_norm", DomainKind::kUniform, 0.1, 10.0, {}},
      {"gae_lambda", DomainKind::kUniform, 0.8, 0.99, {}},
      {"clip_range", DomainKind::kUniform, 0.1, 0.4, {}},
  };
  return s;
}

// 10-dimension SAC search space.
inline SearchSpace sac_search_space() {
  SearchSpace s;
  s.domains = {
      {"buffer_size", DomainKind::kIntLogUniform, 1000, 1000000, {}},
      {"learning_starts", DomainKind::kIntUniform, 100, 10000, {}},
      {"batch_size", DomainKind::kIntUniform, 16, 256, {}},
      {"tau", DomainKind::kLogUniform, 0.001, 0.1, {}},
      {"gamma", DomainKind::kUniform, 0.9, 0.999, {}},
      {"learning_rate", DomainKind::kLogUniform, 1e-5, 1e-1, {}},
      {"ent_coef", DomainKind::kUniform, 0.0, 0.2, {}},
      {"target_update_interval", DomainKind::kIntUniform, 1, 100, {}},
      {"gradient_steps", DomainKind::kIntUniform, 1, 20, {}},
      {"use_sde", DomainKind::kCategorical, 0, 0, {"false", "true"}},
  };
  return s;
}

inline SearchSpace search_space(Algo algo) { return algo == Algo::kPpo ? ppo_search_space() : sac_search_space(); }

inline ParamMap ppo_default_params() {
  return {
      {"learning_rate", 0.0003},  {"n_steps", std::int64_t{2048}}, {"batch_size", std::int64_t{64}},
      {"gamma", 0.99},            {"ent_coef", 0.0},               {"vf_coef", 0.5},
      {"max_grad_norm", 0.5},     {"gae_lambda", 0.95},            {"clip_range", 0.2},
  };
}

inline ParamMap ppo_best_paper_params() {
  return {
      {"learning_rate", 0.0153},  {"n_steps", std::int64_t{559}},  {"batch_size", std::int64_t{193}},
      {"gamma", 0.9657},          {"ent_coef", 0.0548},            {"vf_coef", 0.3999},
      {"max_grad_norm", 9.4229},  {"gae_lambda", 0.8543},          {"clip_range", 0.2865},
  };
}

inline ParamMap sac_default_params() {
  return {
      {"buffer_size", std::int64_t{1000000}},
      {"learning_starts", std::int64_t{1000}},
      {"batch_size", std::int64_t{256}},
      {"tau", 0.005},
      {"gamma", 0.99},
      {"learning_rate", 0.0003},
      {"ent_coef", 0.2},
      {"target_update_interval", std::int64_t{1}},
      {"gradient_steps", std::int64_t{1}},
      {"use_sde", std::string{"false"}},
  };
}

inline ParamMap sac_best_paper_params() {
  return {
      {"buffer_size", std::int64_t{79709}},
      {"learning_starts", std::int64_t{7126}},
      {"batch_size", std::int64_t{104}},
      {"tau", 0.034480},
      {"gamma", 0.920970},
      {"learning_rate", 0.000728},
      {"ent_coef", 0.008345},
      {"target_update_interval", std::int64_t{40}},
      {"gradient_steps", std::int64_t{10}},
      {"use_sde", std::string{"true"}},
  };
}

inline ParamMap default_params(Algo algo) { return algo == Algo::kPpo ? ppo_default_params() : sac_default_params(); }
inline ParamMap best_paper_params(Algo algo) {
  return algo == Algo::kPpo ? ppo_best_paper_params() : sac_best_paper_params();
}

inline PPOConfig ppo_config_from_params(const ParamMap& p) {
  PPOConfig c;
  const int width = get_int(p, "net_width", 64);  // not searched; params files may override
  c.net_arch = {width, width};
  c.learning_rate = get_double(p, "learning_rate", c.learning_rate);
  c.n_steps = get_int(p, "n_steps", c.n_steps);
  c.batch_size = get_int(p, "batch_size", c.batch_size);
  c.gamma = get_double(p, "gamma", c.gamma);
  c.ent_coef = get_double(p, "ent_coef", c.ent_coef);
  c.vf_coef = get_double(p, "vf_coef", c.vf_coef);
  c.max_grad_norm = get_double(p, "max_grad_norm", c.max_grad_norm);
  c.gae_lambda = get_double(p, "gae_lambda", c.gae_lambda);
  c.clip_range = get_double(p, "clip_range", c.clip_range);
  if (c.batch_size > c.n_steps) c.batch_size = c.n_steps;  // sampled independently; keep the pair usable
  c.validate();
  return c;
}

inline SACConfig sac_config_from_params(const ParamMap& p) {
  SACConfig c;
  const int width = get_int(p, "net_width", 32);
  c.net_arch = {width, width};
  c.buffer_size = get_int(p, "buffer_size", c.buffer_size);
  c.learning_starts = get_int(p, "learning_starts", c.learning_starts);
  c.batch_size = get_int(p, "batch_size", c.batch_size);
  c.tau = get_double(p, "tau", c.tau);
  c.gamma = get_double(p, "gamma", c.gamma);
  c.learning_rate = get_double(p, "learning_rate", c.learning_rate);
  c.ent_coef = get_double(p, "ent_coef", c.ent_coef);
  c.target_update_interval = get_int(p, "target_update_interval", c.target_update_interval);
  c.gradient_steps = get_int(p, "gradient_steps", c.gradient_steps);
  c.use_sde = get_bool(p, "use_sde", c.use_sde);
  if (c.learning_starts > c.buffer_size) c.learning_starts = c.buffer_size;
  c.validate();
  return c;
}

}  // namespace armtune
