#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "armtune/errors.hpp"
#include "armtune/rng.hpp"

namespace armtune {

inline constexpr int kNumJoints = 7;
inline constexpr int kObservationDim = 13;  // 7 joints + EE position + goal position

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend bool operator==(const Vec3& a, const Vec3& b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

using JointVector = std::array<double, kNumJoints>;

// One row of modified (Craig) Denavit-Hartenberg constants.
struct DhRow {
  double a = 0.0;             // link length, meters
  double alpha = 0.0;         // link twist, radians
  double d = 0.0;             // link offset, meters
  double theta_offset = 0.0;  // joint angle offset, radians
};

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;
};

struct ArmModel {
  std::array<DhRow, kNumJoints> dh{};
  std::array<JointLimit, kNumJoints> limits{};
  Vec3 tool_offset{};

  void validate() const {
    for (int i = 0; i < kNumJoints; ++i) {
      if (!(limits[i].lower < limits[i].upper)) {
        throw UsageError("ArmModel: joint " + std::to_string(i + 1) + " limit interval is empty");
      }
    }
  }
};

// Franka Emika Panda geometry (modified DH). External constant data; the
// shipped data/panda_arm.json holds the same table.
inline ArmModel panda_model() {
  constexpr double kHalfPi = 1.5707963267948966;
  ArmModel m;
  m.dh = {{{0.0, 0.0, 0.333, 0.0},
           {0.0, -kHalfPi, 0.0, 0.0},
           {0.0, kHalfPi, 0.316, 0.0},
           {0.0825, kHalfPi, 0.0, 0.0},
           {-0.0825, -kHalfPi, 0.384, 0.0},
           {0.0, kHalfPi, 0.0, 0.0},
           {0.088, kHalfPi, 0.0, 0.0}}};
  m.limits = {{{-2.8973, 2.8973},
               {-1.7628, 1.7628},
               {-2.8973, 2.8973},
               {-3.0718, -0.0698},
               {-2.8973, 2.8973},
               {-0.0175, 3.7525},
               {-2.8973, 2.8973}}};
  m.tool_offset = {0.0, 0.0, 0.107};
  return m;
}

// Plain-text model document: {"dh": 7x4, "limits": 7x2, "tool_offset": [x,y,z]}.
// Parse failures name the offending field.
inline ArmModel parse_arm_model(const nlohmann::json& doc) {
  auto fail = [](const std::string& field, const std::string& why) -> void {
    throw IoError("arm model field '" + field + "': " + why);
  };
  ArmModel m;
  if (!doc.is_object()) throw IoError("arm model document: expected a JSON object");

  if (!doc.contains("dh")) fail("dh", "missing");
  const auto& dh = doc["dh"];
  if (!dh.is_array() || dh.size() != kNumJoints) fail("dh", "expected 7 rows");
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& row = dh[i];
    if (!row.is_array() || row.size() != 4) fail("dh", "row " + std::to_string(i + 1) + " must have 4 numbers");
    for (int j = 0; j < 4; ++j) {
      if (!row[j].is_number()) fail("dh", "row " + std::to_string(i + 1) + " entry " + std::to_string(j + 1) + " is not a number");
    }
    m.dh[i] = {row[0].get<double>(), row[1].get<double>(), row[2].get<double>(), row[3].get<double>()};
  }

  if (!doc.contains("limits")) fail("limits", "missing");
  const auto& lim = doc["limits"];
  if (!lim.is_array() || lim.size() != kNumJoints) fail("limits", "expected 7 rows");
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& row = lim[i];
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
      fail("limits", "row " + std::to_string(i + 1) + " must be [lower, upper]");
    }
    m.limits[i] = {row[0].get<double>(), row[1].get<double>()};
    if (!(m.limits[i].lower < m.limits[i].upper)) fail("limits", "row " + std::to_string(i + 1) + " has lower >= upper");
  }

  if (!doc.contains("tool_offset")) fail("tool_offset", "missing");
  const auto& tool = doc["tool_offset"];
  if (!tool.is_array() || tool.size() != 3 || !tool[0].is_number() || !tool[1].is_number() || !tool[2].is_number()) {
    fail("tool_offset", "expected 3 numbers");
  }
  m.tool_offset = {tool[0].get<double>(), tool[1].get<double>(), tool[2].get<double>()};
  return m;
}

inline ArmModel load_arm_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open arm model file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("arm model file " + path + " is not valid JSON: " + e.what());
  }
  return parse_arm_model(doc);
}

// Tool-frame origin in the base frame. Hand-rolled rotation/translation
// composition; the test suite checks it against a homogeneous-matrix chain.
inline Vec3 forward_kinematics(const ArmModel& model, const JointVector& joints) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (joints[i] < model.limits[i].lower || joints[i] > model.limits[i].upper) {
      throw std::domain_error("forward_kinematics: joint " + std::to_string(i + 1) + " out of limits");
    }
  }
  double r[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  double p[3] = {0, 0, 0};
  for (int i = 0; i < kNumJoints; ++i) {
    const DhRow& row = model.dh[i];
    const double theta = joints[i] + row.theta_offset;
    const double c = std::cos(theta), s = std::sin(theta);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    // Modified DH link transform: RotX(alpha) * TransX(a) * RotZ(theta) * TransZ(d).
    const double rl[3][3] = {{c, -s, 0.0}, {s * ca, c * ca, -sa}, {s * sa, c * sa, ca}};
    const double pl[3] = {row.a, -row.d * sa, row.d * ca};
    for (int k = 0; k < 3; ++k) p[k] += r[k][0] * pl[0] + r[k][1] * pl[1] + r[k][2] * pl[2];
    double next[3][3];
    for (int k = 0; k < 3; ++k) {
      for (int j = 0; j < 3; ++j) {
        next[k][j] = r[k][0] * rl[0][j] + r[k][1] * rl[1][j] + r[k][2] * rl[2][j];
      }
    }
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) r[k][j] = next[k][j];
  }
  const double t[3] = {model.tool_offset.x, model.tool_offset.y, model.tool_offset.z};
  return {p[0] + r[0][0] * t[0] + r[0][1] * t[1] + r[0][2] * t[2],
          p[1] + r[1][0] * t[0] + r[1][1] * t[1] + r[1][2] * t[2],
          p[2] + r[2][0] * t[0] + r[2][1] * t[1] + r[2][2] * t[2]};
}

// Dense reward: negative Euclidean distance between end effector and goal.
inline double reach_reward(const Vec3& ee, const Vec3& goal) { return -distance(ee, goal); }

// Mid-range of each joint's limit interval.
inline JointVector home_configuration(const ArmModel& model) {
  JointVector q{};
  for (int i = 0; i < kNumJoints; ++i) q[i] = 0.5 * (model.limits[i].lower + model.limits[i].upper);
  return q;
}

struct EnvConfig {
  int max_steps = 50;
  double action_scale = 0.05;  // radians per unit action per joint
  Vec3 goal_low{};             // goal box corners, ordered componentwise
  Vec3 goal_high{};
  double success_threshold = 0.05;  // meters, strict inequality
  bool randomize_start = false;     // fixed home pose by default

  void validate() const {
    if (max_steps < 1) throw UsageError("EnvConfig: max_steps must be >= 1");
    if (!(action_scale > 0.0)) throw UsageError("EnvConfig: action_scale must be > 0");
    if (!(success_threshold > 0.0)) throw UsageError("EnvConfig: success_threshold must be > 0");
    if (goal_low.x > goal_high.x || goal_low.y > goal_high.y || goal_low.z > goal_high.z) {
      throw UsageError("EnvConfig: goal box corners not ordered componentwise");
    }
  }
};

// Default task: goals uniform in a 0.3 m cube centered on the home-pose EE.
inline EnvConfig default_env_config(const ArmModel& model, int max_steps = 50) {
  const Vec3 center = forward_kinematics(model, home_configuration(model));
  const double half = 0.15;
  EnvConfig cfg;
  cfg.max_steps = max_steps;
  cfg.goal_low = {center.x - half, center.y - half, center.z - half};
  cfg.goal_high = {center.x + half, center.y + half, center.z + half};
  return cfg;
}

// Uniform componentwise sample inside the goal box; consumes exactly 3 draws.
inline Vec3 sample_goal(Rng& rng, const EnvConfig& config) {
  return {rng.uniform(config.goal_low.x, config.goal_high.x),
          rng.uniform(config.goal_low.y, config.goal_high.y),
          rng.uniform(config.goal_low.z, config.goal_high.z)};
}

struct Observation {
  JointVector joints{};
  Vec3 ee_pos{};
  Vec3 goal_pos{};

  std::array<double, kObservationDim> flatten() const {
    std::array<double, kObservationDim> out{};
    for (int i = 0; i < kNumJoints; ++i) out[i] = joints[i];
    out[7] = ee_pos.x;
    out[8] = ee_pos.y;
    out[9] = ee_pos.z;
    out[10] = goal_pos.x;
    out[11] = goal_pos.y;
    out[12] = goal_pos.z;
    return out;
  }
};

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

// Kinematic reach-target MDP. Joint deltas integrate directly; no dynamics.
// Single-threaded; distinct instances share nothing and may run in parallel.
class ReachEnv {
 public:
  ReachEnv(ArmModel model, EnvConfig config, std::uint64_t seed)
      : model_(std::move(model)), config_(config), rng_(seed, Rng::stream_id("env")) {
    model_.validate();
    config_.validate();
  }

  // Reseeds the goal stream, then starts a fresh episode.
  Observation reset(std::uint64_t seed) {
    rng_ = Rng(seed, Rng::stream_id("env"));
    return reset();
  }

  Observation reset() {
    joints_ = home_configuration(model_);
    if (config_.randomize_start) {
      for (int i = 0; i < kNumJoints; ++i) {
        joints_[i] = rng_.uniform(model_.limits[i].lower, model_.limits[i].upper);
      }
    }
    goal_ = sample_goal(rng_, config_);
    ee_ = forward_kinematics(model_, joints_);
    step_count_ = 0;
    episode_done_ = false;
    return observation();
  }

  StepResult step(const std::array<double, kNumJoints>& action) {
    if (episode_done_) throw UsageError("ReachEnv::step called after episode end; call reset()");
    for (double a : action) {
      if (!std::isfinite(a)) throw NumericError("ReachEnv::step: non-finite action component");
    }
    for (int i = 0; i < kNumJoints; ++i) {
      const double delta = config_.action_scale * std::clamp(action[i], -1.0, 1.0);
      joints_[i] = std::clamp(joints_[i] + delta, model_.limits[i].lower, model_.limits[i].upper);
    }
    ee_ = forward_kinematics(model_, joints_);
    ++step_count_;
    StepResult result;
    result.reward = reach_reward(ee_, goal_);
    result.terminated = distance(ee_, goal_) < config_.success_threshold;
    result.truncated = !result.terminated && step_count_ >= config_.max_steps;
    result.observation = observation();
    episode_done_ = result.terminated || result.truncated;
    return result;
  }

  Observation observation() const { return {joints_, ee_, goal_}; }
  bool episode_active() const { return !episode_done_; }
  int step_count() const { return step_count_; }
  const EnvConfig& config() const { return config_; }
  const ArmModel& model() const { return model_; }

 private:
  ArmModel model_;
  EnvConfig config_;
  Rng rng_;
  JointVector joints_{};
  Vec3 ee_{};
  Vec3 goal_{};
  int step_count_ = 0;
  bool episode_done_ = true;  // must reset() before stepping
};

}  // namespace armtune
