#pragma once

#include "arsq/action_codec.hpp"
#include "arsq/envs.hpp"
#include "arsq/replay.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace arsq::oracle {

// Finite MDP whose joint action is `dims` digits in base `bins`, dimension 0
// most significant.
struct FiniteMdp {
  int states = 1;
  int dims = 1;
  int bins = 2;
  std::vector<std::vector<double>> reward;                  // [s][a]
  std::vector<std::vector<std::vector<double>>> transition;  // [s][a][s'], ignored for terminal states
  std::vector<bool> terminal;                                // [s]; empty means none

  int joint_actions() const;
  bool is_terminal(int s) const { return !terminal.empty() && terminal[static_cast<std::size_t>(s)]; }
  void validate() const;
};

int joint_digit(int joint, int dim, int dims, int bins);
// Index of the digits of dims < d, i.e. the conditioning prefix of head d.
int joint_prefix(int joint, int dim, int dims, int bins);

// alpha * log sum_i exp(x_i / alpha), max-shifted.
double soft_max(std::span<const double> x, double alpha);

struct TabularSoftModel {
  int states = 0;
  int joint_actions = 0;
  std::vector<std::vector<double>> joint_q;  // [s][a]
  std::vector<double> value;                 // [s]
  double alpha = 1.0;
  double gamma = 0.0;
  int iterations = 0;
  std::vector<double> residuals;  // max |V_new - V| per sweep

  std::vector<double> policy(int s) const;
};

TabularSoftModel soft_value_iteration(const FiniteMdp& mdp, double alpha, double gamma, double tol = 1e-12,
                                      int max_iterations = 100000);

// Seeded instance with uniform(0, 1) rewards and Dirichlet(1) transitions.
FiniteMdp make_random_mdp(int states, int dims, int bins, std::uint64_t seed);

// One-step samples over a single-level grid.
struct TabularSample {
  int state = 0;
  int action = 0;  // joint index
  double reward = 0.0;
};

struct TabularData {
  int states = 1;
  int dims = 1;
  int bins = 2;
  std::vector<TabularSample> samples;
};

// Requires a one-level spec; every transition maps to state 0.
TabularData one_step_data(const OfflineDataset& dataset, const ActionSpec& spec);

class TabularArsq {
 public:
  TabularArsq() = default;
  TabularArsq(int states, int dims, int bins, double alpha);

  int states() const { return states_; }
  int dims() const { return dims_; }
  int bins() const { return bins_; }
  int joint_actions() const;
  double alpha() const { return alpha_; }

  double& value(int s) { return value_[static_cast<std::size_t>(s)]; }
  double value(int s) const { return value_[static_cast<std::size_t>(s)]; }
  double& dim_adv(int dim, int s, int prefix, int bin);
  double dim_adv(int dim, int s, int prefix, int bin) const;

  double joint_advantage(int s, int joint) const;
  double joint_q(int s, int joint) const { return value(s) + joint_advantage(s, joint); }
  int greedy(int s) const;

  // Subtract alpha * log sum exp from every head.
  void project();
  // max |sum_b exp(A/alpha) - 1| over all heads.
  double normalization_error() const;

 private:
  std::size_t offset(int dim, int s, int prefix) const;

  int states_ = 0, dims_ = 0, bins_ = 0;
  double alpha_ = 1.0;
  std::vector<double> value_;
  std::vector<std::vector<double>> adv_;  // per dim: [s][prefix][bin]
};

struct FitOptions {
  int steps = 20000;
  double lr = 0.1;
  double tol = 0.0;  // stop early once the max residual falls below tol
};

// Semi-gradient descent toward r + gamma * E[V(s')], errors summed over all (s, a).
TabularArsq tabular_arsq_fit(const FiniteMdp& mdp, double alpha, double gamma, const FitOptions& options = {});
// Regression toward observed rewards, errors averaged over samples.
TabularArsq tabular_arsq_fit(const TabularData& data, double alpha, const FitOptions& options = {});

enum class IndependentLoss {
  per_dimension,  // each q_d regressed toward r on its own
  joint,          // the mean-combined estimate regressed toward r
};

class TabularIndependent {
 public:
  TabularIndependent() = default;
  TabularIndependent(int states, int dims, int bins);

  int states() const { return states_; }
  int dims() const { return dims_; }
  int bins() const { return bins_; }
  int joint_actions() const;

  double& q(int dim, int s, int bin);
  double q(int dim, int s, int bin) const;
  // Mean over dimensions.
  double joint_q(int s, int joint) const;
  int greedy(int s) const;

 private:
  int states_ = 0, dims_ = 0, bins_ = 0;
  std::vector<double> q_;  // [dim][s][bin]
};

TabularIndependent tabular_independent_fit(const TabularData& data, const FitOptions& options = {},
                                           IndependentLoss loss = IndependentLoss::per_dimension);

using JointQ = std::function<double(std::span<const double>)>;

// Mean |Q(a) - reward(a)| over n uniform actions in [-1, 1]^2.
double q_landscape_error(const JointQ& model, const ModeLandscape& landscape, int n_samples, std::uint64_t seed);

struct MaeRow {
  std::string method;
  std::uint64_t seed = 0;
  double mae = 0.0;
};

// CSV with header method,seed,mae.
void write_mae_csv(const std::filesystem::path& path, std::span<const MaeRow> rows);

}  // namespace arsq::oracle
