#include "arsq/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace arsq::nn {

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "silu_layernorm") return Activation::silu_layernorm;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "silu_layernorm"; }

void DenseNetworkConfig::validate() const {
  if (input_width < 1 || output_width < 1) throw std::invalid_argument("network widths must be positive");
  if (hidden_widths.empty()) throw std::invalid_argument("network needs at least one hidden layer");
  for (int w : hidden_widths)
    if (w < 1) throw std::invalid_argument("network widths must be positive");
}

Linear::Linear(std::string name, int in, int out, bool use_bias, Rng& rng) : has_bias(use_bias), in_(in), out_(out) {
  // Fan-in scaled uniform weights, zero bias.
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  weight = Parameter(name + "/w", std::move(w));
  if (has_bias) bias = Parameter(name + "/b", Matrix::Zero(1, out));
}

Var Linear::forward(Graph& g, Var x) {
  Var y = ad::matmul(x, g.parameter(weight));
  return has_bias ? ad::add_row(y, g.parameter(bias)) : y;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

void Linear::collect(std::vector<const Parameter*>& out) const {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

Mlp::Mlp(std::string name, int input_width, std::span<const int> hidden_widths, Activation activation,
         bool use_bias, Rng& rng)
    : activation_(activation) {
  int in = input_width;
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    const std::string layer = name + "/h" + std::to_string(i);
    layers_.emplace_back(layer, in, hidden_widths[i], use_bias, rng);
    if (activation_ == Activation::silu_layernorm) {
      norm_gain_.emplace_back(layer + "/ln_gain", Matrix::Ones(1, hidden_widths[i]));
      norm_shift_.emplace_back(layer + "/ln_shift", Matrix::Zero(1, hidden_widths[i]));
    }
    in = hidden_widths[i];
  }
}

Var Mlp::forward(Graph& g, Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(g, x);
    if (activation_ == Activation::tanh) {
      x = ad::tanh(x);
    } else {
      x = ad::layer_norm(x, g.parameter(norm_gain_[i]), g.parameter(norm_shift_[i]), 1e-5);
      x = ad::silu(x);
    }
  }
  return x;
}

int Mlp::output_width() const { return layers_.empty() ? 0 : layers_.back().out_width(); }

void Mlp::collect(std::vector<Parameter*>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out);
    if (activation_ == Activation::silu_layernorm) {
      out.push_back(&norm_gain_[i]);
      out.push_back(&norm_shift_[i]);
    }
  }
}

void Mlp::collect(std::vector<const Parameter*>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out);
    if (activation_ == Activation::silu_layernorm) {
      out.push_back(&norm_gain_[i]);
      out.push_back(&norm_shift_[i]);
    }
  }
}

DenseNetwork::DenseNetwork(std::string name, const DenseNetworkConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  trunk_ = Mlp(name, config_.input_width, config_.hidden_widths, config_.activation, config_.use_bias, rng);
  output_ = Linear(name + "/out", trunk_.output_width(), config_.output_width, config_.use_bias, rng);
}

Var DenseNetwork::forward(Graph& g, Var x) {
  if (x.cols() != config_.input_width)
    throw std::invalid_argument("network input has width " + std::to_string(x.cols()) + ", expected " +
                                std::to_string(config_.input_width));
  return output_.forward(g, trunk_.forward(g, x));
}

Matrix DenseNetwork::predict(const Matrix& x) {
  Graph g;
  return forward(g, x).value();
}

std::vector<Parameter*> DenseNetwork::parameters() {
  std::vector<Parameter*> out;
  trunk_.collect(out);
  output_.collect(out);
  return out;
}

std::vector<const Parameter*> DenseNetwork::parameters() const {
  std::vector<const Parameter*> out;
  trunk_.collect(out);
  output_.collect(out);
  return out;
}

void zero_parameters(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->value().setZero();
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  if (options_.weight_decay < 0.0) throw std::invalid_argument("adam: weight decay must be >= 0");
  for (Parameter* p : params_) {
    first_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
    second_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
  }
}

void Adam::step() {
  for (Parameter* p : params_) {
    if (p->grad().size() != p->value().size())
      throw std::invalid_argument("adam: gradient shape mismatch for " + p->name());
    if (!p->grad().allFinite()) throw NumericalError("non-finite gradient in parameter '" + p->name() + "'");
  }
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Matrix& w = params_[i]->value();
    const Matrix& g = params_[i]->grad();
    first_[i] = b1 * first_[i] + (1.0 - b1) * g;
    second_[i] = b2 * second_[i] + (1.0 - b2) * g.cwiseProduct(g);
    if (options_.weight_decay != 0.0) w *= 1.0 - lr * options_.weight_decay;
    w.array() -= lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + options_.epsilon);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

namespace {

void check_pairing(std::span<Parameter* const> target, std::span<const Parameter* const> online) {
  if (target.size() != online.size()) throw std::invalid_argument("parameter lists differ in length");
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i]->value().rows() != online[i]->value().rows() ||
        target[i]->value().cols() != online[i]->value().cols())
      throw std::invalid_argument("parameter shape mismatch: " + target[i]->name());
}

}  // namespace

void ema_update(std::span<Parameter* const> target, std::span<const Parameter* const> online, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("ema_update: rho must lie in [0, 1]");
  check_pairing(target, online);
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (rho == 1.0) continue;
    if (rho == 0.0) {
      target[i]->value() = online[i]->value();
      continue;
    }
    target[i]->value() = rho * target[i]->value() + (1.0 - rho) * online[i]->value();
  }
}

void copy_parameters(std::span<Parameter* const> target, std::span<const Parameter* const> online) {
  ema_update(target, online, 0.0);
}

}  // namespace arsq::nn
