#pragma once

#include "arsq/action_codec.hpp"
#include "arsq/replay.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace arsq {

enum class RewardKind { dense, sparse };

struct EnvSpec {
  int obs_width = 1;
  ActionSpec action_spec;
  int horizon = 1;
  RewardKind reward_kind = RewardKind::dense;
};

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;       // terminal, no bootstrap
  bool truncated = false;  // horizon reached, bootstrap
  bool success = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual std::string name() const = 0;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  // Throws std::logic_error when called after the episode ended.
  virtual StepResult step(std::span<const double> action) = 0;
  virtual bool one_step() const { return false; }
  // Scripted optimal action for the current state.
  virtual std::vector<double> expert_action() const = 0;
};

// Sum of isotropic Gaussian bumps over [-1, 1]^2.
struct Mode {
  std::array<double, 2> center{0.0, 0.0};
  double amplitude = 0.0;
  double sigma = 1.0;
};

struct ModeLandscape {
  std::vector<Mode> modes;

  double reward(std::span<const double> action) const;
  double bound() const;  // sum of |amplitude|
  std::size_t best_mode() const;
  void validate() const;

  // One optimal, one suboptimal and one negative mode.
  static ModeLandscape motivating();
  // One optimal, two suboptimal and two negative modes.
  static ModeLandscape error_analysis();
};

class OneStepEnv : public Env {
 public:
  OneStepEnv(std::string name, ModeLandscape landscape, int bins_per_level, int levels);

  std::string name() const override { return name_; }
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  bool one_step() const override { return true; }
  std::vector<double> expert_action() const override;
  const ModeLandscape& landscape() const { return landscape_; }

 private:
  std::string name_;
  ModeLandscape landscape_;
  EnvSpec spec_;
  bool done_ = true;
};

// Velocity-controlled point in [-1, 1]^2 that must reach a goal.
// Observation: (x, y, goal_x, goal_y). Start and goal are drawn from the
// spawn box [-0.9, 0.9]^2 with at least 0.5 between them.
class PointMassEnv : public Env {
 public:
  static constexpr double kGain = 0.05;
  static constexpr double kGoalRadius = 0.1;
  static constexpr double kSpawn = 0.9;
  static constexpr double kMinStartDistance = 0.5;

  PointMassEnv(RewardKind reward_kind, int bins_per_level, int levels, int horizon = 100);

  std::string name() const override;
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  std::vector<double> expert_action() const override;

  std::array<double, 2> position() const { return pos_; }
  std::array<double, 2> goal() const { return goal_; }
  double distance() const;

 private:
  std::vector<double> observe() const;

  EnvSpec spec_;
  std::array<double, 2> pos_{0.0, 0.0};
  std::array<double, 2> goal_{0.0, 0.0};
  int t_ = 0;
  bool done_ = true;
};

// Names: "toy" (motivating), "landscape", "point_mass", "point_mass_sparse".
std::unique_ptr<Env> make_env(const std::string& name, int bins_per_level, int levels);

enum class PolicyKind { expert, medium, noisy, mode_mix };
PolicyKind parse_policy_kind(const std::string& s);

struct DemoOptions {
  double medium_noise = 0.3;
  double medium_random_prob = 0.2;
  std::vector<double> mode_frequencies{0.1, 0.3, 0.6};
  double mode_jitter = 0.05;
};

// One-step envs yield one transition per episode.
OfflineDataset generate_demos(Env& env, PolicyKind kind, int n_episodes, std::uint64_t seed,
                              const DemoOptions& options = {});

struct LandscapeGrid {
  int resolution = 0;
  std::vector<double> a1, a2, q;  // row-major over (a1, a2)
};

LandscapeGrid landscape_ground_truth(const ModeLandscape& landscape, int resolution);
// CSV with header a1,a2,q.
void write_grid_csv(const std::filesystem::path& path, const LandscapeGrid& grid);

}  // namespace arsq
