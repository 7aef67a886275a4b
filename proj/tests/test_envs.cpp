#include "arsq/envs.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace arsq;

TEST_CASE("one-step env examples") {
  auto env = make_env("toy", 2, 1);
  CHECK(env->one_step());
  CHECK(env->reset(123) == std::vector<double>{0.0, 0.0});
  const std::vector<double> best{0.6, 0.6};
  const StepResult r = env->step(best);
  CHECK(std::abs(r.reward - 1.0) < 1e-9);
  CHECK(r.done);
  CHECK_THROWS_AS(env->step(best), std::logic_error);
  env->reset(0);
  const std::vector<double> corner{-1.0, -1.0};
  CHECK(std::abs(env->step(corner).reward) < 0.01);
}

TEST_CASE("landscape value at the optimal center includes the leakage of other modes") {
  const ModeLandscape l = ModeLandscape::error_analysis();
  double expected = 0.0;
  for (const Mode& m : l.modes) {
    const double d2 = m.center[0] * m.center[0] + m.center[1] * m.center[1];
    expected += m.amplitude * std::exp(-d2 / (2.0 * m.sigma * m.sigma));
  }
  const double origin[] = {0.0, 0.0};
  CHECK(l.reward(origin) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(l.bound() == doctest::Approx(3.8));
  CHECK(l.best_mode() == 0);
}

TEST_CASE("ground-truth grids") {
  const ModeLandscape l = ModeLandscape::error_analysis();
  const LandscapeGrid corners = landscape_ground_truth(l, 2);
  REQUIRE(corners.q.size() == 4);
  CHECK(corners.a1[1] == -1.0);
  CHECK(corners.a2[1] == 1.0);
  CHECK_THROWS(landscape_ground_truth(l, 1));
  // The modes are mirror-symmetric in a1.
  const LandscapeGrid g = landscape_ground_truth(l, 21);
  for (int i = 0; i < 21; ++i)
    for (int j = 0; j < 21; ++j) CHECK(g.q[static_cast<std::size_t>(i * 21 + j)] == doctest::Approx(g.q[static_cast<std::size_t>((20 - i) * 21 + j)]));
  const auto path = std::filesystem::temp_directory_path() / "arsq_grid.csv";
  write_grid_csv(path, corners);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "a1,a2,q");
}

TEST_CASE("point mass determinism and spawn box") {
  PointMassEnv a(RewardKind::dense, 3, 2), b(RewardKind::dense, 3, 2);
  CHECK(a.reset(7) == b.reset(7));
  for (std::uint64_t s = 0; s < 1000; ++s) {
    a.reset(s);
    for (double v : a.position()) CHECK(std::abs(v) <= PointMassEnv::kSpawn);
    for (double v : a.goal()) CHECK(std::abs(v) <= PointMassEnv::kSpawn);
    CHECK(a.distance() >= PointMassEnv::kMinStartDistance);
  }
}

TEST_CASE("point mass kinematics: the expert arrives within the bound") {
  PointMassEnv env(RewardKind::dense, 3, 2);
  for (std::uint64_t s = 0; s < 50; ++s) {
    env.reset(s);
    // Per-axis commands saturate at 1, so the slower axis sets the bound.
    const double gap = std::max(std::abs(env.goal()[0] - env.position()[0]), std::abs(env.goal()[1] - env.position()[1]));
    const int bound = static_cast<int>(std::ceil(gap / PointMassEnv::kGain));
    int steps = 0;
    StepResult r;
    do {
      r = env.step(env.expert_action());
      ++steps;
    } while (!r.done && !r.truncated);
    CHECK(r.success);
    CHECK(steps <= bound);
  }
}

TEST_CASE("point mass reward, termination and truncation") {
  PointMassEnv env(RewardKind::dense, 3, 2, 5);
  env.reset(1);
  const std::vector<double> still{0.0, 0.0};
  StepResult r;
  for (int i = 0; i < 5; ++i) {
    const double before = env.distance();
    r = env.step(still);
    CHECK(r.reward == doctest::Approx(-before));
  }
  CHECK(r.truncated);
  CHECK_FALSE(r.done);
  CHECK_THROWS(env.step(still));

  PointMassEnv sparse(RewardKind::sparse, 3, 2);
  sparse.reset(2);
  double total = 0.0;
  do {
    r = sparse.step(sparse.expert_action());
    total += r.reward;
  } while (!r.done && !r.truncated);
  CHECK(total == 1.0);
  CHECK(r.success);
}

TEST_CASE("demo generators") {
  auto toy = make_env("toy", 2, 1);
  const OfflineDataset mix = generate_demos(*toy, PolicyKind::mode_mix, 1000, 0);
  CHECK(mix.size() == 1000);
  std::array<int, 3> counts{};
  const auto& modes = static_cast<OneStepEnv&>(*toy).landscape().modes;
  for (const Transition& t : mix.transitions()) {
    std::size_t nearest = 0;
    double best = 1e9;
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const double d = std::hypot(t.action_continuous[0] - modes[m].center[0], t.action_continuous[1] - modes[m].center[1]);
      if (d < best) {
        best = d;
        nearest = m;
      }
    }
    ++counts[nearest];
  }
  CHECK(std::abs(counts[0] / 1000.0 - 0.1) < 0.03);
  CHECK(std::abs(counts[1] / 1000.0 - 0.3) < 0.03);
  CHECK(std::abs(counts[2] / 1000.0 - 0.6) < 0.03);

  PointMassEnv pm(RewardKind::dense, 3, 2);
  CHECK_THROWS(generate_demos(pm, PolicyKind::mode_mix, 1, 0));
  CHECK_THROWS(generate_demos(pm, PolicyKind::expert, 0, 0));

  const OfflineDataset expert = generate_demos(pm, PolicyKind::expert, 10, 4);
  CHECK(expert.episodes().size() == 10);
  int successes = 0;
  for (const auto& e : expert.episodes()) successes += expert.transitions()[e.end - 1].done ? 1 : 0;
  CHECK(successes == 10);

  auto mean_return = [](const OfflineDataset& d) {
    double total = 0.0;
    for (std::size_t e = 0; e < d.episodes().size(); ++e) total += d.episode_return(e);
    return total / static_cast<double>(d.episodes().size());
  };
  const double noisy = mean_return(generate_demos(pm, PolicyKind::noisy, 100, 5));
  const double medium = mean_return(generate_demos(pm, PolicyKind::medium, 100, 5));
  CHECK(noisy < medium);

  const OfflineDataset again = generate_demos(pm, PolicyKind::medium, 5, 6);
  const OfflineDataset same = generate_demos(pm, PolicyKind::medium, 5, 6);
  REQUIRE(again.size() == same.size());
  for (std::size_t i = 0; i < again.size(); ++i)
    CHECK(again.transitions()[i].action_continuous == same.transitions()[i].action_continuous);
}

TEST_CASE("property: stored discrete actions are within half a fine bin of the clamped action") {
  PointMassEnv pm(RewardKind::dense, 5, 2);
  const ActionSpec& spec = pm.spec().action_spec;
  const OfflineDataset d = generate_demos(pm, PolicyKind::medium, 20, 8);
  for (const Transition& t : d.transitions()) {
    const ContinuousAction c = decode(spec, t.action_discrete);
    for (int k = 0; k < 2; ++k)
      CHECK(std::abs(c[static_cast<std::size_t>(k)] - clamp_to_range(spec, k, t.action_continuous[static_cast<std::size_t>(k)])) <=
            0.5 * spec.fine_width(k) + 1e-12);
  }
}

TEST_CASE("unknown names are rejected") {
  CHECK_THROWS(make_env("cartpole", 2, 1));
  CHECK_THROWS(parse_policy_kind("perfect"));
}
