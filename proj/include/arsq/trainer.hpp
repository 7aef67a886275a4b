#pragma once

#include "arsq/config.hpp"
#include "arsq/envs.hpp"
#include "arsq/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace arsq {

struct MetricsRow {
  std::int64_t step = 0;
  double episode_return_mean = 0.0;
  double episode_return_std = 0.0;
  double success_rate = 0.0;
  double rl_loss = 0.0;
  double bc_loss = 0.0;
  double v_mean = 0.0;
  double policy_entropy_mean = 0.0;
  double wall_ms = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,episode_return_mean,episode_return_std,success_rate,rl_loss,bc_loss,v_mean,policy_entropy_mean,wall_ms";
std::string format_metrics_row(const MetricsRow& row);

// Builds the environment named in the config with its (B, L) lattice.
std::unique_ptr<Env> make_env(const TrainConfig& config);
// Twin advantage networks, their targets and the value pair, with targets
// initialized to the online weights.
ArsqNetworks build_networks(const TrainConfig& config, const EnvSpec& env_spec);

struct EvalStats {
  int episodes = 0;
  double return_mean = 0.0;
  double return_std = 0.0;  // population standard deviation
  double success_rate = 0.0;
  double entropy_mean = 0.0;  // per step, summed over heads
};

// Episode seeds are drawn from `seed`, so equal seeds replay equal starts.
EvalStats evaluate_policy(ArsqNetworks& nets, Env& env, int n_episodes, std::uint64_t seed, double alpha,
                          SelectionMode mode = SelectionMode::greedy);

// Restores the architecture from config.txt next to the checkpoint. An empty
// env_name uses the training environment; a different one must share its
// observation width and action lattice.
EvalStats evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::string& env_name, int n_episodes,
                              std::uint64_t seed);

// The demonstration dataset D described by the config (possibly empty).
OfflineDataset prepare_demos(const TrainConfig& config, const EnvSpec& env_spec);

// max over heads and rows of |sum_a exp(A(a) / alpha) - 1|.
double normalization_error(AdvantageNetwork& net, const Batch& batch);

struct TrainResult {
  std::vector<MetricsRow> rows;
  EvalStats final_eval;
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;
  double max_normalization_error = 0.0;
};

// Writes metrics.csv, config.txt and checkpoint.bin into out_dir. Throws
// ConfigError on invalid settings and nn::NumericalError when a loss or
// gradient stops being finite.
TrainResult train(const TrainConfig& config, const std::filesystem::path& out_dir);

}  // namespace arsq
