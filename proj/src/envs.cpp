#include "arsq/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace arsq {

double ModeLandscape::reward(std::span<const double> action) const {
  if (action.size() != 2) throw std::invalid_argument("landscape reward expects a 2-D action");
  double r = 0.0;
  for (const Mode& m : modes) {
    const double dx = action[0] - m.center[0], dy = action[1] - m.center[1];
    r += m.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * m.sigma * m.sigma));
  }
  return r;
}

double ModeLandscape::bound() const {
  double b = 0.0;
  for (const Mode& m : modes) b += std::abs(m.amplitude);
  return b;
}

std::size_t ModeLandscape::best_mode() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < modes.size(); ++i)
    if (modes[i].amplitude > modes[best].amplitude) best = i;
  return best;
}

void ModeLandscape::validate() const {
  if (modes.empty()) throw std::invalid_argument("landscape needs at least one mode");
  for (const Mode& m : modes) {
    if (!(m.sigma > 0.0)) throw std::invalid_argument("landscape mode sigma must be positive");
    for (double c : m.center)
      if (c < -1.0 || c > 1.0) throw std::invalid_argument("landscape mode center outside [-1, 1]^2");
  }
}

ModeLandscape ModeLandscape::motivating() {
  return {{{{0.6, 0.6}, 1.0, 0.15}, {{-0.6, 0.6}, 0.1, 0.15}, {{0.6, -0.6}, -1.0, 0.15}}};
}

ModeLandscape ModeLandscape::error_analysis() {
  return {{{{0.0, 0.0}, 1.0, 0.25},
           {{-0.65, 0.65}, 0.4, 0.25},
           {{0.65, 0.65}, 0.4, 0.25},
           {{-0.65, -0.65}, -1.0, 0.25},
           {{0.65, -0.65}, -1.0, 0.25}}};
}

// ---- one-step -------------------------------------------------------------

OneStepEnv::OneStepEnv(std::string name, ModeLandscape landscape, int bins_per_level, int levels)
    : name_(std::move(name)), landscape_(std::move(landscape)) {
  landscape_.validate();
  spec_.obs_width = 2;
  spec_.action_spec = ActionSpec::uniform(2, -1.0, 1.0, bins_per_level, levels);
  spec_.horizon = 1;
  spec_.reward_kind = RewardKind::dense;
}

std::vector<double> OneStepEnv::reset(std::uint64_t) {
  done_ = false;
  return {0.0, 0.0};
}

StepResult OneStepEnv::step(std::span<const double> action) {
  if (done_) throw std::logic_error(name_ + ": step() after the episode ended; call reset()");
  if (action.size() != 2) throw std::invalid_argument(name_ + ": action must be 2-D");
  const double a[2] = {clamp_to_range(spec_.action_spec, 0, action[0]), clamp_to_range(spec_.action_spec, 1, action[1])};
  done_ = true;
  StepResult r;
  r.obs = {0.0, 0.0};
  r.reward = landscape_.reward(a);
  r.done = true;
  r.success = false;
  return r;
}

std::vector<double> OneStepEnv::expert_action() const {
  const Mode& m = landscape_.modes[landscape_.best_mode()];
  return {m.center[0], m.center[1]};
}

// ---- point mass -----------------------------------------------------------

PointMassEnv::PointMassEnv(RewardKind reward_kind, int bins_per_level, int levels, int horizon) {
  if (horizon < 1) throw std::invalid_argument("point mass: horizon must be >= 1");
  spec_.obs_width = 4;
  spec_.action_spec = ActionSpec::uniform(2, -1.0, 1.0, bins_per_level, levels);
  spec_.horizon = horizon;
  spec_.reward_kind = reward_kind;
}

std::string PointMassEnv::name() const {
  return spec_.reward_kind == RewardKind::dense ? "point_mass" : "point_mass_sparse";
}

std::vector<double> PointMassEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-kSpawn, kSpawn);
  pos_ = {box(rng), box(rng)};
  do {
    goal_ = {box(rng), box(rng)};
  } while (distance() < kMinStartDistance);
  t_ = 0;
  done_ = false;
  return observe();
}

double PointMassEnv::distance() const { return std::hypot(pos_[0] - goal_[0], pos_[1] - goal_[1]); }

std::vector<double> PointMassEnv::observe() const { return {pos_[0], pos_[1], goal_[0], goal_[1]}; }

StepResult PointMassEnv::step(std::span<const double> action) {
  if (done_) throw std::logic_error(name() + ": step() after the episode ended; call reset()");
  if (action.size() != 2) throw std::invalid_argument(name() + ": action must be 2-D");
  for (int d = 0; d < 2; ++d) {
    const double a = clamp_to_range(spec_.action_spec, d, action[static_cast<std::size_t>(d)]);
    pos_[static_cast<std::size_t>(d)] = std::clamp(pos_[static_cast<std::size_t>(d)] + kGain * a, -1.0, 1.0);
  }
  ++t_;
  StepResult r;
  const double dist = distance();
  r.success = dist <= kGoalRadius;
  if (spec_.reward_kind == RewardKind::dense) r.reward = -dist + (r.success ? 1.0 : 0.0);
  else r.reward = r.success ? 1.0 : 0.0;
  r.done = r.success;
  r.truncated = !r.done && t_ >= spec_.horizon;
  done_ = r.done || r.truncated;
  r.obs = observe();
  return r;
}

std::vector<double> PointMassEnv::expert_action() const {
  std::vector<double> a(2);
  for (std::size_t d = 0; d < 2; ++d) a[d] = std::clamp((goal_[d] - pos_[d]) / kGain, -1.0, 1.0);
  return a;
}

std::unique_ptr<Env> make_env(const std::string& name, int bins_per_level, int levels) {
  if (name == "toy") return std::make_unique<OneStepEnv>("toy", ModeLandscape::motivating(), bins_per_level, levels);
  if (name == "landscape")
    return std::make_unique<OneStepEnv>("landscape", ModeLandscape::error_analysis(), bins_per_level, levels);
  if (name == "point_mass") return std::make_unique<PointMassEnv>(RewardKind::dense, bins_per_level, levels);
  if (name == "point_mass_sparse") return std::make_unique<PointMassEnv>(RewardKind::sparse, bins_per_level, levels);
  throw std::invalid_argument("unknown environment '" + name + "'");
}

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "expert") return PolicyKind::expert;
  if (s == "medium") return PolicyKind::medium;
  if (s == "noisy") return PolicyKind::noisy;
  if (s == "mode_mix") return PolicyKind::mode_mix;
  throw std::invalid_argument("unknown demo policy '" + s + "'");
}

OfflineDataset generate_demos(Env& env, PolicyKind kind, int n_episodes, std::uint64_t seed,
                              const DemoOptions& options) {
  if (n_episodes < 1) throw std::invalid_argument("generate_demos: n_episodes must be >= 1");
  const ActionSpec& spec = env.spec().action_spec;
  const OneStepEnv* one_step = dynamic_cast<const OneStepEnv*>(&env);
  if (kind == PolicyKind::mode_mix) {
    if (one_step == nullptr) throw std::invalid_argument("mode_mix demos need a one-step environment");
    if (options.mode_frequencies.size() != one_step->landscape().modes.size())
      throw std::invalid_argument("mode_mix: one frequency per landscape mode required");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<std::size_t> pick_mode(options.mode_frequencies.begin(), options.mode_frequencies.end());

  auto uniform_action = [&] {
    std::vector<double> a(static_cast<std::size_t>(spec.dims));
    for (int d = 0; d < spec.dims; ++d) {
      const auto i = static_cast<std::size_t>(d);
      a[i] = spec.low[i] + (spec.high[i] - spec.low[i]) * unit(rng);
    }
    return a;
  };
  auto clamp_all = [&](std::vector<double> a) {
    for (int d = 0; d < spec.dims; ++d) a[static_cast<std::size_t>(d)] = clamp_to_range(spec, d, a[static_cast<std::size_t>(d)]);
    return a;
  };

  std::vector<Transition> rows;
  for (int e = 0; e < n_episodes; ++e) {
    std::vector<double> obs = env.reset(rng());
    for (;;) {
      std::vector<double> action;
      switch (kind) {
        case PolicyKind::expert: action = env.expert_action(); break;
        case PolicyKind::noisy: action = uniform_action(); break;
        case PolicyKind::medium:
          if (unit(rng) < options.medium_random_prob) {
            action = uniform_action();
          } else {
            action = env.expert_action();
            for (double& v : action) v += options.medium_noise * unit_normal(rng);
            action = clamp_all(std::move(action));
          }
          break;
        case PolicyKind::mode_mix: {
          const Mode& m = one_step->landscape().modes[pick_mode(rng)];
          action = {m.center[0] + options.mode_jitter * unit_normal(rng),
                    m.center[1] + options.mode_jitter * unit_normal(rng)};
          action = clamp_all(std::move(action));
          break;
        }
      }
      StepResult r = env.step(action);
      Transition t;
      t.obs = obs;
      t.action_continuous = action;
      t.action_discrete = encode(spec, action);
      t.reward = r.reward;
      t.next_obs = r.obs;
      t.done = r.done;
      t.episode_id = e;
      t.is_demo = true;
      rows.push_back(std::move(t));
      obs = std::move(r.obs);
      if (r.done || r.truncated) break;
    }
  }
  return OfflineDataset(std::move(rows));
}

LandscapeGrid landscape_ground_truth(const ModeLandscape& landscape, int resolution) {
  if (resolution < 2) throw std::invalid_argument("grid resolution must be >= 2");
  LandscapeGrid g;
  g.resolution = resolution;
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const double a[2] = {-1.0 + 2.0 * i / (resolution - 1), -1.0 + 2.0 * j / (resolution - 1)};
      g.a1.push_back(a[0]);
      g.a2.push_back(a[1]);
      g.q.push_back(landscape.reward(a));
    }
  }
  return g;
}

void write_grid_csv(const std::filesystem::path& path, const LandscapeGrid& grid) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "a1,a2,q\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < grid.q.size(); ++i) out << grid.a1[i] << ',' << grid.a2[i] << ',' << grid.q[i] << '\n';
}

}  // namespace arsq
