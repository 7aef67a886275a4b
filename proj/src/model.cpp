#include "arsq/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace arsq {

ConditioningMode parse_conditioning_mode(const std::string& s) {
  if (s == "coarse_outer_dim_inner") return ConditioningMode::coarse_outer_dim_inner;
  if (s == "dim_outer_coarse_inner" || s == "swap") return ConditioningMode::dim_outer_coarse_inner;
  if (s == "no_cf_cond") return ConditioningMode::no_cf_cond;
  if (s == "no_dim_cond") return ConditioningMode::no_dim_cond;
  if (s == "no_cf") return ConditioningMode::no_cf;
  if (s == "plain") return ConditioningMode::plain;
  throw std::invalid_argument("unknown conditioning mode '" + s + "'");
}

std::string to_string(ConditioningMode m) {
  switch (m) {
    case ConditioningMode::coarse_outer_dim_inner: return "coarse_outer_dim_inner";
    case ConditioningMode::dim_outer_coarse_inner: return "dim_outer_coarse_inner";
    case ConditioningMode::no_cf_cond: return "no_cf_cond";
    case ConditioningMode::no_dim_cond: return "no_dim_cond";
    case ConditioningMode::no_cf: return "no_cf";
    case ConditioningMode::plain: return "plain";
  }
  return "?";
}

// ---- FactorLayout ---------------------------------------------------------

FactorLayout::FactorLayout(const ActionSpec& spec, ConditioningMode mode) : spec_(spec), mode_(mode) {
  spec_.validate();
  const int D = spec_.dims, L = spec_.levels, B = spec_.bins_per_level;
  const bool flat = mode == ConditioningMode::no_cf || mode == ConditioningMode::plain;
  if (flat) {
    for (int d = 0; d < D; ++d) factors_.push_back({d, 0, static_cast<int>(spec_.fine_bins()), true});
  } else if (mode == ConditioningMode::coarse_outer_dim_inner || mode == ConditioningMode::no_dim_cond) {
    for (int l = 0; l < L; ++l)
      for (int d = 0; d < D; ++d) factors_.push_back({d, l, B, false});
  } else {
    for (int d = 0; d < D; ++d)
      for (int l = 0; l < L; ++l) factors_.push_back({d, l, B, false});
  }
  const std::size_t n = factors_.size();
  visible_.assign(n, std::vector<bool>(n, false));
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t s = 0; s < n; ++s) {
      bool v = false;
      switch (mode) {
        case ConditioningMode::coarse_outer_dim_inner:
        case ConditioningMode::dim_outer_coarse_inner:
        case ConditioningMode::no_cf: v = s < q; break;
        case ConditioningMode::no_cf_cond: v = factors_[s].dim < factors_[q].dim; break;
        case ConditioningMode::no_dim_cond: v = factors_[s].level < factors_[q].level; break;
        case ConditioningMode::plain: v = false; break;
      }
      visible_[q][s] = v;
    }
  }
}

std::size_t FactorLayout::find(int level, int dim) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].dim == dim && factors_[i].level == level) return i;
  throw std::out_of_range("no head for level " + std::to_string(level) + ", dim " + std::to_string(dim) +
                          " under mode " + to_string(mode_));
}

int FactorLayout::index_of(const DiscreteAction& a, std::size_t f) const {
  const Factor& fa = factors_[f];
  if (fa.flat) return static_cast<int>(a.global(fa.dim, spec_.bins_per_level));
  return a.at(fa.dim, fa.level);
}

void FactorLayout::assign(DiscreteAction& a, std::size_t f, int value) const {
  const Factor& fa = factors_[f];
  if (value < 0 || value >= fa.width) throw std::out_of_range("head value out of range");
  if (!fa.flat) {
    a.at(fa.dim, fa.level) = value;
    return;
  }
  const auto digits = level_decompose(spec_, value);
  for (int l = 0; l < spec_.levels; ++l) a.at(fa.dim, l) = digits[static_cast<std::size_t>(l)];
}

double FactorLayout::center_feature(const DiscreteAction& a, std::size_t f) const {
  const Factor& fa = factors_[f];
  double cell = 0.0, cells = 1.0;
  if (fa.flat) {
    cell = static_cast<double>(a.global(fa.dim, spec_.bins_per_level));
    cells = static_cast<double>(spec_.fine_bins());
  } else {
    for (int l = 0; l <= fa.level; ++l) {
      cell = cell * spec_.bins_per_level + a.at(fa.dim, l);
      cells *= spec_.bins_per_level;
    }
  }
  return 2.0 * (cell + 0.5) / cells - 1.0;
}

int FactorLayout::encoding_width() const {
  int w = 0;
  for (const Factor& f : factors_) w += f.width + 2;
  return w;
}

ActionPrefix ActionPrefix::empty(const FactorLayout& layout) {
  return {DiscreteAction(layout.spec().dims, layout.spec().levels), std::vector<bool>(layout.size(), false)};
}

ActionPrefix ActionPrefix::complete(const FactorLayout& layout, DiscreteAction action) {
  check_action(layout.spec(), action);
  return {std::move(action), std::vector<bool>(layout.size(), true)};
}

// ---- AdvantageNetwork -----------------------------------------------------

AdvantageNetwork::AdvantageNetwork(std::string name, AdvantageNetworkConfig config, nn::Rng& rng)
    : config_(std::move(config)), layout_(config_.action_spec, config_.mode) {
  if (!(config_.alpha > 0.0)) throw std::invalid_argument("advantage network: alpha must be positive");
  if (config_.obs_width < 1) throw std::invalid_argument("advantage network: obs width must be positive");
  if (config_.hidden_widths.empty()) throw std::invalid_argument("advantage network: backbone needs a layer");
  const int in = config_.obs_width + layout_.encoding_width();
  backbone_ = nn::Mlp(name + "/backbone", in, config_.hidden_widths, config_.activation, config_.use_bias, rng);
  for (std::size_t f = 0; f < layout_.size(); ++f) {
    const Factor& fa = layout_[f];
    heads_.emplace_back(name + "/l" + std::to_string(fa.level) + "/d" + std::to_string(fa.dim),
                        backbone_.output_width(), fa.width, true, rng);
  }
}

Matrix AdvantageNetwork::encode_inputs(const Matrix& obs, std::span<const DiscreteAction> actions,
                                       std::size_t f) const {
  if (obs.cols() != config_.obs_width)
    throw std::invalid_argument("observation width " + std::to_string(obs.cols()) + ", expected " +
                                std::to_string(config_.obs_width));
  if (actions.size() != static_cast<std::size_t>(obs.rows()))
    throw std::invalid_argument("one action per observation row required");
  const Eigen::Index n = obs.rows();
  Matrix x = Matrix::Zero(n, config_.obs_width + layout_.encoding_width());
  x.leftCols(config_.obs_width) = obs;
  for (Eigen::Index i = 0; i < n; ++i) {
    const DiscreteAction& a = actions[static_cast<std::size_t>(i)];
    Eigen::Index off = config_.obs_width;
    for (std::size_t s = 0; s < layout_.size(); ++s) {
      const int w = layout_[s].width;
      if (layout_.visible(f, s)) {
        x(i, off + layout_.index_of(a, s)) = 1.0;
        x(i, off + w) = layout_.center_feature(a, s);
        x(i, off + w + 1) = 1.0;
      }
      off += w + 2;
    }
  }
  return x;
}

Var AdvantageNetwork::head_scores(Graph& g, const Matrix& obs, std::span<const DiscreteAction> actions,
                                  std::size_t f) {
  if (f >= heads_.size()) throw std::out_of_range("head index out of range");
  Var features = backbone_.forward(g, g.constant(encode_inputs(obs, actions, f)));
  return heads_[f].forward(g, features);
}

Var AdvantageNetwork::head_advantages(Graph& g, const Matrix& obs, std::span<const DiscreteAction> actions,
                                      std::size_t f) {
  Var u = head_scores(g, obs, actions, f);
  return ad::sub_col(u, ad::logsumexp_rows(u, config_.alpha));
}

Var AdvantageNetwork::joint_advantage(Graph& g, const Matrix& obs, std::span<const DiscreteAction> actions) {
  Var total;
  for (std::size_t f = 0; f < layout_.size(); ++f) {
    std::vector<int> idx(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i) idx[i] = layout_.index_of(actions[i], f);
    Var term = ad::gather_cols(head_advantages(g, obs, actions, f), idx);
    total = f == 0 ? term : ad::add(total, term);
  }
  return total;
}

std::vector<Parameter*> AdvantageNetwork::parameters() {
  std::vector<Parameter*> out;
  backbone_.collect(out);
  for (auto& h : heads_) h.collect(out);
  return out;
}

std::vector<const Parameter*> AdvantageNetwork::parameters() const {
  std::vector<const Parameter*> out;
  backbone_.collect(out);
  for (const auto& h : heads_) h.collect(out);
  return out;
}

void AdvantageNetwork::zero_heads() {
  for (auto& h : heads_) {
    h.weight.value().setZero();
    if (h.has_bias) h.bias.value().setZero();
  }
}

// ---- free functions -------------------------------------------------------

Matrix row_matrix(std::span<const double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = values[i];
  return m;
}

std::vector<double> normalize_head(std::span<const double> scores, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("normalize_head: alpha must be positive");
  if (scores.empty()) throw std::invalid_argument("normalize_head: empty head");
  for (double u : scores)
    if (!std::isfinite(u)) throw std::invalid_argument("normalize_head: non-finite score");
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double u : scores) z += std::exp((u - mx) / alpha);
  const double lse = mx + alpha * std::log(z);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lse;
  return out;
}

std::vector<double> dimensional_advantages(AdvantageNetwork& net, std::span<const double> obs,
                                           const ActionPrefix& prefix, int level, int dim) {
  const FactorLayout& layout = net.layout();
  const std::size_t f = layout.find(level, dim);
  if (prefix.chosen.size() != layout.size()) throw std::invalid_argument("prefix has wrong head count");
  for (std::size_t s = 0; s < layout.size(); ++s) {
    if (layout.visible(f, s) && !prefix.chosen[s])
      throw std::invalid_argument("prefix is missing a choice this head conditions on");
    if (s >= f && prefix.chosen[s])
      throw std::invalid_argument("prefix contains a choice that comes at or after the requested head");
  }
  Graph g;
  const DiscreteAction actions[] = {prefix.action};
  Var a = net.head_advantages(g, row_matrix(obs), actions, f);
  const Matrix& v = a.value();
  return {v.data(), v.data() + v.size()};
}

double joint_advantage(AdvantageNetwork& net, std::span<const double> obs, const DiscreteAction& action) {
  check_action(net.layout().spec(), action);
  Graph g;
  const DiscreteAction actions[] = {action};
  return net.joint_advantage(g, row_matrix(obs), actions).scalar();
}

std::vector<double> min_rule_policy(std::span<const double> adv1, std::span<const double> adv2, double alpha) {
  if (adv1.size() != adv2.size() || adv1.empty()) throw std::invalid_argument("min_rule_policy: size mismatch");
  std::vector<double> m(adv1.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::min(adv1[i], adv2[i]);
  const double mx = *std::max_element(m.begin(), m.end());
  double z = 0.0;
  for (double& v : m) {
    v = std::exp((v - mx) / alpha);
    z += v;
  }
  for (double& v : m) v /= z;
  return m;
}

ActionSelection select_action(AdvantageNetwork& net1, AdvantageNetwork& net2, std::span<const double> obs,
                              double alpha, SelectionMode mode, nn::Rng& rng) {
  const FactorLayout& layout = net1.layout();
  if (!(layout.spec() == net2.layout().spec()) || layout.mode() != net2.layout().mode())
    throw std::invalid_argument("select_action: networks disagree on action spec or conditioning");
  ActionSelection out{DiscreteAction(layout.spec().dims, layout.spec().levels), 0.0};
  const Matrix o = row_matrix(obs);
  for (std::size_t f = 0; f < layout.size(); ++f) {
    Graph g;
    const DiscreteAction current[] = {out.action};
    const Matrix& a1 = net1.head_advantages(g, o, current, f).value();
    const Matrix a1_copy = a1;
    const Matrix& a2 = net2.head_advantages(g, o, current, f).value();
    const auto pi = min_rule_policy({a1_copy.data(), static_cast<std::size_t>(a1_copy.size())},
                                    {a2.data(), static_cast<std::size_t>(a2.size())}, alpha);
    for (double p : pi)
      if (p > 0.0) out.entropy -= p * std::log(p);
    int choice = 0;
    if (mode == SelectionMode::greedy) {
      choice = static_cast<int>(std::max_element(pi.begin(), pi.end()) - pi.begin());
    } else {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double r = u(rng);
      double acc = 0.0;
      choice = static_cast<int>(pi.size()) - 1;
      for (std::size_t i = 0; i < pi.size(); ++i) {
        acc += pi[i];
        if (r < acc) {
          choice = static_cast<int>(i);
          break;
        }
      }
    }
    layout.assign(out.action, f, choice);
  }
  return out;
}

// ---- values ---------------------------------------------------------------

ValueNetworkPair::ValueNetworkPair(const nn::DenseNetworkConfig& config, nn::Rng& rng, const std::string& prefix) {
  for (int i = 0; i < 2; ++i) {
    online[static_cast<std::size_t>(i)] = nn::DenseNetwork(prefix + "v" + std::to_string(i + 1), config, rng);
    target[static_cast<std::size_t>(i)] =
        nn::DenseNetwork(prefix + "target/v" + std::to_string(i + 1), config, rng);
  }
  update_targets(0.0);
}

ad::Vector ValueNetworkPair::target_min(const Matrix& obs) {
  const Matrix v1 = target[0].predict(obs);
  const Matrix v2 = target[1].predict(obs);
  return v1.col(0).cwiseMin(v2.col(0));
}

void ValueNetworkPair::update_targets(double rho) {
  for (std::size_t i = 0; i < 2; ++i) {
    const auto on = std::as_const(online[i]).parameters();
    const auto tg = target[i].parameters();
    nn::ema_update(tg, on, rho);
  }
}

double soft_value(ValueNetworkPair& pair, std::span<const double> obs, ValueHead which) {
  const Matrix o = row_matrix(obs);
  switch (which) {
    case ValueHead::online_1: return pair.online[0].predict(o)(0, 0);
    case ValueHead::online_2: return pair.online[1].predict(o)(0, 0);
    case ValueHead::target_min: return pair.target_min(o)(0);
  }
  return 0.0;
}

}  // namespace arsq
