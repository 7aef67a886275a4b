#pragma once

#include "arsq/action_codec.hpp"
#include "arsq/autodiff.hpp"
#include "arsq/nn.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace arsq {

using ad::Graph;
using ad::Matrix;
using ad::Parameter;
using ad::Var;

// Order in which (level, dimension) heads are visited and which earlier
// choices each head may see.
enum class ConditioningMode {
  coarse_outer_dim_inner,  // default: all dims of level 0, then level 1, ...
  dim_outer_coarse_inner,  // all levels of dim 0, then dim 1, ...
  no_cf_cond,              // levels of a dimension are chosen together
  no_dim_cond,             // dimensions of a level are chosen together
  no_cf,                   // one flat B^L head per dimension, dim conditioning
  plain,                   // one flat head per dimension, no conditioning
};

ConditioningMode parse_conditioning_mode(const std::string& s);
std::string to_string(ConditioningMode m);

// One output head. Flat heads select the full fine index of a dimension.
struct Factor {
  int dim = 0;
  int level = 0;
  int width = 0;
  bool flat = false;
};

class FactorLayout {
 public:
  FactorLayout() = default;
  FactorLayout(const ActionSpec& spec, ConditioningMode mode);

  std::size_t size() const { return factors_.size(); }
  const Factor& operator[](std::size_t i) const { return factors_[i]; }
  ConditioningMode mode() const { return mode_; }
  const ActionSpec& spec() const { return spec_; }

  // Whether head `query` conditions on the choice made at head `source`.
  bool visible(std::size_t query, std::size_t source) const { return visible_[query][source]; }
  // Head position of (level, dim); flat layouts only accept level 0.
  std::size_t find(int level, int dim) const;

  int index_of(const DiscreteAction& a, std::size_t f) const;
  void assign(DiscreteAction& a, std::size_t f, int value) const;
  // Center in [-1, 1] of the cell fixed by the digits of a up to head f.
  double center_feature(const DiscreteAction& a, std::size_t f) const;
  // Sum over heads of (width + 2): one-hot, center, validity flag.
  int encoding_width() const;

 private:
  ActionSpec spec_;
  ConditioningMode mode_ = ConditioningMode::coarse_outer_dim_inner;
  std::vector<Factor> factors_;
  std::vector<std::vector<bool>> visible_;
};

// A partially generated action: chosen[f] marks heads already decided.
struct ActionPrefix {
  DiscreteAction action;
  std::vector<bool> chosen;

  static ActionPrefix empty(const FactorLayout& layout);
  static ActionPrefix complete(const FactorLayout& layout, DiscreteAction action);
};

struct AdvantageNetworkConfig {
  int obs_width = 1;
  ActionSpec action_spec;
  ConditioningMode mode = ConditioningMode::coarse_outer_dim_inner;
  std::vector<int> hidden_widths{64, 64};
  nn::Activation activation = nn::Activation::tanh;
  bool use_bias = true;
  double alpha = 0.01;
};

// Shared backbone over (observation, encoded prefix) with one linear output
// layer per head. Head outputs are log-sum-exp normalized so that
// sum_a exp(A(a) / alpha) = 1 for every head.
class AdvantageNetwork {
 public:
  AdvantageNetwork() = default;
  AdvantageNetwork(std::string name, AdvantageNetworkConfig config, nn::Rng& rng);

  const AdvantageNetworkConfig& config() const { return config_; }
  const FactorLayout& layout() const { return layout_; }
  double alpha() const { return config_.alpha; }

  // Backbone input for head f. Slots of heads not visible to f stay zero.
  Matrix encode_inputs(const Matrix& obs, std::span<const DiscreteAction> actions, std::size_t f) const;

  Var head_scores(Graph& g, const Matrix& obs, std::span<const DiscreteAction> actions, std::size_t f);
  Var head_advantages(Graph& g, const Matrix& obs, std::span<const DiscreteAction> actions, std::size_t f);
  // Sum over heads of the advantage of the chosen entry, n x 1.
  Var joint_advantage(Graph& g, const Matrix& obs, std::span<const DiscreteAction> actions);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void zero_heads();

 private:
  AdvantageNetworkConfig config_;
  FactorLayout layout_;
  nn::Mlp backbone_;
  std::vector<nn::Linear> heads_;
};

// A_i = u_i - alpha * log sum_j exp(u_j / alpha).
std::vector<double> normalize_head(std::span<const double> scores, double alpha);

std::vector<double> dimensional_advantages(AdvantageNetwork& net, std::span<const double> obs,
                                           const ActionPrefix& prefix, int level, int dim);
double joint_advantage(AdvantageNetwork& net, std::span<const double> obs, const DiscreteAction& action);

enum class SelectionMode { sample, greedy };

// pi proportional to exp(min(A1, A2) / alpha), renormalized.
std::vector<double> min_rule_policy(std::span<const double> adv1, std::span<const double> adv2, double alpha);

struct ActionSelection {
  DiscreteAction action;
  double entropy = 0.0;  // sum of per-head entropies along the chosen prefix
};

ActionSelection select_action(AdvantageNetwork& net1, AdvantageNetwork& net2, std::span<const double> obs,
                              double alpha, SelectionMode mode, nn::Rng& rng);

enum class ValueHead { online_1, online_2, target_min };

struct ValueNetworkPair {
  ValueNetworkPair() = default;
  ValueNetworkPair(const nn::DenseNetworkConfig& config, nn::Rng& rng, const std::string& prefix = "");

  std::array<nn::DenseNetwork, 2> online;
  std::array<nn::DenseNetwork, 2> target;

  // min over the two target networks, one entry per row.
  ad::Vector target_min(const Matrix& obs);
  void update_targets(double rho);
};

double soft_value(ValueNetworkPair& pair, std::span<const double> obs, ValueHead which);

Matrix row_matrix(std::span<const double> values);

}  // namespace arsq
