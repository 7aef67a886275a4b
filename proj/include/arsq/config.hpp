#pragma once

#include "arsq/model.hpp"
#include "arsq/nn.hpp"
#include "arsq/replay.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace arsq {

enum class RolloutNet { current, target };

// Flat `key = value` configuration. Lines starting with '#' and text after a
// '#' are ignored; unknown keys are rejected.
struct TrainConfig {
  std::string env = "point_mass";
  int bins = 3;    // B, per level
  int levels = 2;  // L
  double alpha = 0.01;
  double gamma = 0.99;
  double tau = 0.005;  // target <- (1 - tau) * target + tau * online
  double learning_rate = 3e-4;
  double weight_decay = 0.0;
  int batch_size = 64;  // rows per mini-batch, for both b_D and b_R
  double bc_margin = -1.0;
  double bc_weight = 1.0;
  bool bc_variant = false;
  bool use_rl = true;  // false: behavior cloning only
  ConditioningMode conditioning = ConditioningMode::coarse_outer_dim_inner;
  std::vector<int> hidden_widths{64, 64};
  nn::Activation activation = nn::Activation::tanh;
  RolloutNet rollout_net = RolloutNet::current;
  int grad_steps_per_env_step = 1;
  std::int64_t total_env_steps = 20000;
  std::int64_t offline_grad_steps = 5000;  // used when total_env_steps is 0
  std::int64_t eval_every = 2000;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
  std::string offline_data;
  // Demonstrations generated in-process when offline_data is empty.
  std::string demo_policy = "medium";
  int demo_episodes = 0;
  std::optional<Segment> demo_segment;
  double demo_fraction = 1.0;
  std::int64_t replay_capacity = 1'000'000;
  bool log_wall_time = false;  // off keeps metrics files reproducible

  void set(const std::string& key, const std::string& value);
  void validate() const;
  std::string to_text() const;

  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace arsq
