#pragma once

#include "arsq/model.hpp"

#include <array>
#include <span>
#include <vector>

namespace arsq {

struct LossConfig {
  double gamma = 0.99;
  double alpha = 0.01;
  double bc_margin = -1.0;  // C_m
  double bc_weight = 1.0;   // beta
  bool bc_variant = false;  // log-sum-exp variant instead of the margin sum
  bool use_rl = true;       // false trains the BC objective alone

  void validate() const;
};

// Mini-batch of transitions in matrix form.
struct Batch {
  Matrix obs;
  Matrix next_obs;
  std::vector<DiscreteAction> actions;
  ad::Vector reward;
  std::vector<bool> done;

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
};

// The two online advantage/value estimators with their targets.
struct ArsqNetworks {
  std::array<AdvantageNetwork, 2> adv;
  std::array<AdvantageNetwork, 2> adv_target;
  ValueNetworkPair values;

  std::vector<Parameter*> online_parameters();
  std::vector<Parameter*> all_parameters();
  void update_targets(double rho);
};

// y = r + gamma * min(V1_target(s'), V2_target(s')), or r when done.
double td_target(double reward, bool done, std::span<const double> next_obs, ValueNetworkPair& values,
                 double gamma);
ad::Vector td_targets(const Batch& batch, ValueNetworkPair& values, double gamma);

// 0.5 * (V + A - y)^2 per row.
Var squared_td_error(Var value, Var advantage, const ad::Vector& y);
Var rl_loss(Graph& g, nn::DenseNetwork& value, AdvantageNetwork& adv, const Matrix& obs,
            std::span<const DiscreteAction> actions, const ad::Vector& y);

// Per-head terms from normalized advantages (n x B) and expert columns.
Var margin_terms(Var advantages, std::span<const int> expert, double margin);
Var variant_terms(Var advantages, std::span<const int> expert, double margin);

// Summed over all heads with the expert prefix; one entry per row.
Var bc_margin_loss(Graph& g, AdvantageNetwork& adv, const Matrix& obs, std::span<const DiscreteAction> expert,
                   double margin);
Var bc_variant_loss(Graph& g, AdvantageNetwork& adv, const Matrix& obs, std::span<const DiscreteAction> expert,
                    double margin);

struct LossBreakdown {
  Var total;
  double rl = 0.0;  // mean RL part over both batches
  double bc = 0.0;  // mean unweighted BC part over the demo batch
  double v_mean = 0.0;
};

// mean_{b_D}[L_RL + beta * L_BC] + mean_{b_R}[L_RL], both summed over the
// two estimators. Either batch may be empty, not both.
LossBreakdown combined_loss(Graph& g, const Batch& demo, const Batch& replay, ArsqNetworks& nets,
                            const LossConfig& config);

}  // namespace arsq
