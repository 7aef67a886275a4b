#pragma once

#include "arsq/autodiff.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace arsq::nn {

using ad::Graph;
using ad::Matrix;
using ad::Parameter;
using ad::Var;

using Rng = std::mt19937_64;

enum class Activation { tanh, silu_layernorm };

Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

struct DenseNetworkConfig {
  int input_width = 1;
  std::vector<int> hidden_widths{64};
  int output_width = 1;
  Activation activation = Activation::tanh;
  bool use_bias = true;

  void validate() const;
};

// Weights are stored in x out so that forward is x * W + b.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in, int out, bool use_bias, Rng& rng);

  Var forward(Graph& g, Var x);
  int in_width() const { return in_; }
  int out_width() const { return out_; }
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;

  Parameter weight;
  Parameter bias;  // unused when has_bias is false
  bool has_bias = true;

 private:
  int in_ = 0;
  int out_ = 0;
};

// Stack of hidden layers, each Linear followed by the activation. With
// silu_layernorm the order is Linear -> LayerNorm -> SiLU.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, int input_width, std::span<const int> hidden_widths, Activation activation,
      bool use_bias, Rng& rng);

  Var forward(Graph& g, Var x);
  int output_width() const;
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;

 private:
  Activation activation_ = Activation::tanh;
  std::vector<Linear> layers_;
  std::vector<Parameter> norm_gain_;
  std::vector<Parameter> norm_shift_;
};

class DenseNetwork {
 public:
  DenseNetwork() = default;
  DenseNetwork(std::string name, const DenseNetworkConfig& config, Rng& rng);

  Var forward(Graph& g, Var x);
  Var forward(Graph& g, const Matrix& x) { return forward(g, g.constant(x)); }
  // Convenience evaluation without keeping the graph.
  Matrix predict(const Matrix& x);

  const DenseNetworkConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  DenseNetworkConfig config_;
  Mlp trunk_;
  Linear output_;
};

void zero_parameters(std::span<Parameter* const> params);
void zero_grads(std::span<Parameter* const> params);

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW) when nonzero
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);

  // Applies one update from the gradients currently stored on the
  // parameters. Throws NumericalError naming the parameter if a gradient is
  // not finite.
  void step();
  void zero_grad();
  std::int64_t step_count() const { return steps_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// target <- rho * target + (1 - rho) * online, elementwise.
void ema_update(std::span<Parameter* const> target, std::span<const Parameter* const> online, double rho);
void copy_parameters(std::span<Parameter* const> target, std::span<const Parameter* const> online);

}  // namespace arsq::nn
