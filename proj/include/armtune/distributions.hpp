#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "armtune/errors.hpp"
#include "armtune/rng.hpp"

namespace armtune {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;
inline constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

// Sum over dimensions of the univariate Gaussian log-density.
inline double diag_gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                     const Eigen::VectorXd& action) {
  if (mean.size() != log_std.size() || mean.size() != action.size()) {
    throw UsageError("diag_gaussian_log_prob: size mismatch");
  }
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

// Differential entropy of the diagonal Gaussian.
inline double diag_gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() + 0.5 * static_cast<double>(log_std.size()) * (1.0 + kLog2Pi);
}

// Same density with the terms grouped as the batched training graph groups
// them: -0.5*sum(z^2) - sum(log_std) - d/2*ln(2*pi). Rollout-time values
// computed this way match the update-time recomputation bit for bit.
inline double diag_gaussian_log_prob_grouped(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                             const Eigen::VectorXd& action) {
  if (mean.size() != log_std.size() || mean.size() != action.size()) {
    throw UsageError("diag_gaussian_log_prob: size mismatch");
  }
  double quad = 0.0, ls_sum = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    quad += z * z;
    ls_sum += log_std[i];
  }
  return -0.5 * quad - ls_sum - 0.5 * static_cast<double>(mean.size()) * kLog2Pi;
}

struct SquashedSample {
  Eigen::VectorXd action;      // componentwise in (-1, 1)
  Eigen::VectorXd pre_squash;  // the Gaussian draw before tanh
  double log_prob = 0.0;
};

// tanh-squashed Gaussian sample with the change-of-variables correction.
inline SquashedSample squashed_sample_and_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                                   Rng& rng) {
  SquashedSample s;
  const Eigen::Index d = mean.size();
  s.pre_squash.resize(d);
  s.action.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    s.pre_squash[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
  }
  s.log_prob = diag_gaussian_log_prob(mean, log_std, s.pre_squash);
  for (Eigen::Index i = 0; i < d; ++i) {
    s.action[i] = std::tanh(s.pre_squash[i]);
    s.log_prob -= std::log(1.0 - s.action[i] * s.action[i] + kSquashEps);
  }
  return s;
}

// Same squash with a caller-supplied standard-normal vector (used by the
// episode-frozen exploration scheme).
inline SquashedSample squashed_from_noise(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                          const Eigen::VectorXd& noise) {
  SquashedSample s;
  const Eigen::Index d = mean.size();
  s.pre_squash.resize(d);
  s.action.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    s.pre_squash[i] = mean[i] + std::exp(log_std[i]) * noise[i];
  }
  s.log_prob = diag_gaussian_log_prob(mean, log_std, s.pre_squash);
  for (Eigen::Index i = 0; i < d; ++i) {
    s.action[i] = std::tanh(s.pre_squash[i]);
    s.log_prob -= std::log(1.0 - s.action[i] * s.action[i] + kSquashEps);
  }
  return s;
}

}  // namespace armtune
