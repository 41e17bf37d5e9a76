#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <fstream>

#include "armtune/arm_env.hpp"

using namespace armtune;

namespace {

// Reference forward kinematics: explicit 4x4 homogeneous-matrix chain,
// deliberately a different code path from the production implementation.
Vec3 fk_oracle(const ArmModel& model, const JointVector& joints) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int i = 0; i < kNumJoints; ++i) {
    const DhRow& row = model.dh[i];
    const double th = joints[i] + row.theta_offset;
    const double c = std::cos(th), s = std::sin(th);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    Eigen::Matrix4d t;
    t << c, -s, 0, row.a,
        s * ca, c * ca, -sa, -row.d * sa,
        s * sa, c * sa, ca, row.d * ca,
        0, 0, 0, 1;
    m = m * t;
  }
  Eigen::Vector4d tool(model.tool_offset.x, model.tool_offset.y, model.tool_offset.z, 1.0);
  const Eigen::Vector4d p = m * tool;
  return {p[0], p[1], p[2]};
}

ArmModel panda_wide_limits() {
  ArmModel m = panda_model();
  for (auto& lim : m.limits) lim = {-3.2, 3.9};
  return m;
}

JointVector random_joints(const ArmModel& model, Rng& rng) {
  JointVector q{};
  for (int i = 0; i < kNumJoints; ++i) q[i] = rng.uniform(model.limits[i].lower, model.limits[i].upper);
  return q;
}

}  // namespace

TEST_CASE("zero pose matches the frozen homogeneous-transform value", "[arm_env]") {
  // (0.088, 0, 0.926) computed by an independent script over the same table.
  const ArmModel m = panda_wide_limits();
  const Vec3 ee = forward_kinematics(m, JointVector{});
  REQUIRE(ee.x == Catch::Approx(0.088).margin(1e-12));
  REQUIRE(ee.y == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(ee.z == Catch::Approx(0.926).margin(1e-12));
}

TEST_CASE("random pose matches the frozen oracle value", "[arm_env]") {
  const ArmModel m = panda_model();
  const JointVector q{0.3, -0.4, 0.5, -1.2, 0.7, 1.1, -0.9};
  const Vec3 ee = forward_kinematics(m, q);
  REQUIRE(ee.x == Catch::Approx(0.07459098366110874).margin(1e-9));
  REQUIRE(ee.y == Catch::Approx(0.3419330096048282).margin(1e-9));
  REQUIRE(ee.z == Catch::Approx(0.8905491438982012).margin(1e-9));
}

TEST_CASE("wrist roll about the tool axis leaves the EE unchanged", "[arm_env]") {
  const ArmModel m = panda_model();
  JointVector q{0.3, -0.4, 0.5, -1.2, 0.7, 1.1, -0.9};
  const Vec3 a = forward_kinematics(m, q);
  q[6] += 0.77;
  const Vec3 b = forward_kinematics(m, q);
  REQUIRE(distance(a, b) < 1e-12);
}

TEST_CASE("forward kinematics is pure", "[arm_env]") {
  const ArmModel m = panda_model();
  Rng rng(5);
  const JointVector q = random_joints(m, rng);
  const Vec3 a = forward_kinematics(m, q);
  const Vec3 b = forward_kinematics(m, q);
  REQUIRE(a == b);
}

TEST_CASE("forward kinematics matches the matrix-chain oracle on 100 random poses", "[arm_env]") {
  const ArmModel m = panda_model();
  Rng rng(1234);
  for (int i = 0; i < 100; ++i) {
    const JointVector q = random_joints(m, rng);
    const Vec3 got = forward_kinematics(m, q);
    const Vec3 want = fk_oracle(m, q);
    REQUIRE(distance(got, want) < 1e-9);
  }
}

TEST_CASE("out-of-limit joints are a domain error", "[arm_env]") {
  const ArmModel m = panda_model();
  JointVector q = home_configuration(m);
  q[3] = 0.0;  // joint 4 upper limit is negative
  REQUIRE_THROWS_AS(forward_kinematics(m, q), std::domain_error);
}

TEST_CASE("reward is the negative Euclidean distance", "[arm_env]") {
  REQUIRE(reach_reward({1, 2, 3}, {1, 2, 3}) == 0.0);
  REQUIRE(reach_reward({0, 0, 0}, {0, 0, 1}) == -1.0);
  REQUIRE(reach_reward({1, 2, 2}, {0, 0, 0}) == -3.0);
}

TEST_CASE("reward is symmetric, nonpositive, zero only at the goal", "[arm_env]") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const Vec3 a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec3 b{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    REQUIRE(reach_reward(a, b) == reach_reward(b, a));
    REQUIRE(reach_reward(a, b) <= 0.0);
    if (!(a == b)) REQUIRE(reach_reward(a, b) < 0.0);
  }
}

TEST_CASE("goal sampling: degenerate box returns the corner", "[arm_env]") {
  EnvConfig cfg;
  cfg.goal_low = cfg.goal_high = {0.4, -0.2, 0.7};
  Rng rng(1);
  const Vec3 g = sample_goal(rng, cfg);
  REQUIRE(g == cfg.goal_low);
}

TEST_CASE("goal sampling is uniform in the unit box", "[arm_env]") {
  EnvConfig cfg;
  cfg.goal_low = {0, 0, 0};
  cfg.goal_high = {1, 1, 1};
  Rng rng(2024);
  Vec3 mean{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Vec3 g = sample_goal(rng, cfg);
    mean = mean + g;
  }
  REQUIRE(std::abs(mean.x / n - 0.5) < 0.02);
  REQUIRE(std::abs(mean.y / n - 0.5) < 0.02);
  REQUIRE(std::abs(mean.z / n - 0.5) < 0.02);
}

TEST_CASE("goal sampling consumes exactly three draws and is seed-stable", "[arm_env]") {
  EnvConfig cfg;
  cfg.goal_low = {0, 0, 0};
  cfg.goal_high = {1, 2, 3};
  Rng a(9), b(9);
  const Vec3 g1 = sample_goal(a, cfg);
  const Vec3 g2 = sample_goal(b, cfg);
  REQUIRE(g1 == g2);
  REQUIRE(a.next_u64() == b.next_u64());  // streams still aligned
}

TEST_CASE("reset is reproducible under a seed and restores the home pose", "[arm_env]") {
  const ArmModel m = panda_model();
  ReachEnv env(m, default_env_config(m), 3);
  const Observation o1 = env.reset(7);
  const Observation o2 = env.reset(7);
  REQUIRE(o1.joints == o2.joints);
  REQUIRE(o1.goal_pos == o2.goal_pos);
  REQUIRE(o1.joints == home_configuration(m));
  REQUIRE(distance(o1.ee_pos, forward_kinematics(m, o1.joints)) < 1e-12);
  REQUIRE(env.step_count() == 0);
  REQUIRE(o1.flatten().size() == 13);
}

TEST_CASE("step semantics: clamping, truncation, termination", "[arm_env]") {
  const ArmModel m = panda_model();

  SECTION("action components beyond 1 behave like 1") {
    ReachEnv a(m, default_env_config(m), 11), b(m, default_env_config(m), 11);
    a.reset(5);
    b.reset(5);
    const StepResult ra = a.step({2.0, -3.0, 0.5, 0, 0, 0, 0});
    const StepResult rb = b.step({1.0, -1.0, 0.5, 0, 0, 0, 0});
    REQUIRE(ra.observation.joints == rb.observation.joints);
    REQUIRE(ra.reward == rb.reward);
  }

  SECTION("max_steps=5: five non-terminating steps end in truncation") {
    EnvConfig cfg = default_env_config(m, 5);
    // Push the goal box away from the home EE so zero actions cannot succeed.
    cfg.goal_low.x += 0.4;
    cfg.goal_high.x += 0.4;
    ReachEnv env(m, cfg, 0);
    env.reset(1);
    StepResult r;
    for (int i = 0; i < 5; ++i) {
      REQUIRE(env.episode_active());
      r = env.step({0, 0, 0, 0, 0, 0, 0});
      if (i < 4) {
        REQUIRE_FALSE(r.truncated);
        REQUIRE_FALSE(r.terminated);
      }
    }
    REQUIRE(r.truncated);
    REQUIRE_FALSE(r.terminated);
    REQUIRE_THROWS_AS(env.step({0, 0, 0, 0, 0, 0, 0}), UsageError);
  }

  SECTION("goal at the current EE terminates with reward 0") {
    EnvConfig cfg = default_env_config(m);
    const Vec3 home_ee = forward_kinematics(m, home_configuration(m));
    cfg.goal_low = cfg.goal_high = home_ee;
    ReachEnv env(m, cfg, 0);
    env.reset();
    const StepResult r = env.step({0, 0, 0, 0, 0, 0, 0});
    REQUIRE(r.terminated);
    REQUIRE_FALSE(r.truncated);
    REQUIRE(r.reward == 0.0);
  }

  SECTION("terminated and truncated are mutually exclusive at the step limit") {
    EnvConfig cfg = default_env_config(m, 1);
    const Vec3 home_ee = forward_kinematics(m, home_configuration(m));
    cfg.goal_low = cfg.goal_high = home_ee;  // terminates on the only step
    ReachEnv env(m, cfg, 0);
    env.reset();
    const StepResult r = env.step({0, 0, 0, 0, 0, 0, 0});
    REQUIRE(r.terminated);
    REQUIRE_FALSE(r.truncated);
  }
}

TEST_CASE("episodes are bitwise reproducible under (seed, action sequence)", "[arm_env]") {
  const ArmModel m = panda_model();
  auto run = [&](std::uint64_t seed) {
    ReachEnv env(m, default_env_config(m), seed);
    env.reset(seed);
    std::vector<StepResult> results;
    Rng actions(seed, 55);
    while (env.episode_active()) {
      std::array<double, 7> a{};
      for (auto& v : a) v = actions.uniform(-1, 1);
      results.push_back(env.step(a));
    }
    return results;
  };
  const auto r1 = run(33), r2 = run(33);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    REQUIRE(r1[i].reward == r2[i].reward);
    REQUIRE(r1[i].observation.joints == r2[i].observation.joints);
    REQUIRE(r1[i].observation.ee_pos == r2[i].observation.ee_pos);
    REQUIRE(r1[i].observation.goal_pos == r2[i].observation.goal_pos);
  }
}

TEST_CASE("observation EE tracks forward kinematics through an episode", "[arm_env]") {
  const ArmModel m = panda_model();
  ReachEnv env(m, default_env_config(m), 77);
  Observation obs = env.reset(4);
  Rng actions(4, 66);
  while (env.episode_active()) {
    std::array<double, 7> a{};
    for (auto& v : a) v = actions.uniform(-1, 1);
    const StepResult r = env.step(a);
    obs = r.observation;
    REQUIRE(distance(obs.ee_pos, forward_kinematics(m, obs.joints)) < 1e-12);
    REQUIRE(r.reward <= 0.0);
    if (r.terminated) REQUIRE(distance(obs.ee_pos, obs.goal_pos) < env.config().success_threshold);
  }
}

TEST_CASE("model file round trip and parse errors name the field", "[arm_env]") {
  const std::string path = std::string(ARMTUNE_SOURCE_DIR) + "/data/panda_arm.json";
  const ArmModel loaded = load_arm_model(path);
  const ArmModel builtin = panda_model();
  for (int i = 0; i < kNumJoints; ++i) {
    REQUIRE(loaded.dh[i].a == builtin.dh[i].a);
    REQUIRE(loaded.dh[i].alpha == builtin.dh[i].alpha);
    REQUIRE(loaded.dh[i].d == builtin.dh[i].d);
    REQUIRE(loaded.limits[i].lower == builtin.limits[i].lower);
    REQUIRE(loaded.limits[i].upper == builtin.limits[i].upper);
  }
  REQUIRE(loaded.tool_offset == builtin.tool_offset);

  auto parse_text = [](const std::string& text) { return parse_arm_model(nlohmann::json::parse(text)); };
  REQUIRE_THROWS_WITH(parse_text(R"({"limits": [], "tool_offset": [0,0,0]})"),
                      Catch::Matchers::ContainsSubstring("dh"));
  REQUIRE_THROWS_WITH(parse_text(R"({"dh": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]],
                                    "tool_offset": [0,0,0]})"),
                      Catch::Matchers::ContainsSubstring("limits"));
  REQUIRE_THROWS_WITH(
      parse_text(R"({"dh": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]],
                     "limits": [[-1,1],[-1,1],[-1,1],[-1,1],[-1,1],[-1,1],[-1,1]], "tool_offset": [0,0]})"),
      Catch::Matchers::ContainsSubstring("tool_offset"));
}
