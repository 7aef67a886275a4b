#include "arsq/oracle.hpp"

#include "arsq/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

namespace arsq::oracle {

namespace {

int ipow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

void check_grid(int states, int dims, int bins) {
  if (states < 1 || dims < 1 || bins < 2) throw std::invalid_argument("tabular grid needs states >= 1, dims >= 1, bins >= 2");
}

}  // namespace

int FiniteMdp::joint_actions() const { return ipow(bins, dims); }

void FiniteMdp::validate() const {
  check_grid(states, dims, bins);
  const auto ns = static_cast<std::size_t>(states), na = static_cast<std::size_t>(joint_actions());
  if (reward.size() != ns) throw std::invalid_argument("mdp: reward needs one row per state");
  if (!terminal.empty() && terminal.size() != ns) throw std::invalid_argument("mdp: terminal needs one flag per state");
  for (std::size_t s = 0; s < ns; ++s) {
    if (reward[s].size() != na) throw std::invalid_argument("mdp: reward row has the wrong number of actions");
    if (is_terminal(static_cast<int>(s))) continue;
    if (transition.size() != ns || transition[s].size() != na)
      throw std::invalid_argument("mdp: transition shape must be [states][actions][states]");
    for (const auto& row : transition[s]) {
      if (row.size() != ns) throw std::invalid_argument("mdp: transition row has the wrong number of states");
      double total = 0.0;
      for (double p : row) {
        if (p < 0.0) throw std::invalid_argument("mdp: negative transition probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mdp: transition row does not sum to 1");
    }
  }
}

int joint_digit(int joint, int dim, int dims, int bins) { return (joint / ipow(bins, dims - 1 - dim)) % bins; }

int joint_prefix(int joint, int dim, int dims, int bins) { return joint / ipow(bins, dims - dim); }

double soft_max(std::span<const double> x, double alpha) {
  const double m = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double v : x) total += std::exp((v - m) / alpha);
  return m + alpha * std::log(total);
}

std::vector<double> TabularSoftModel::policy(int s) const {
  const auto& q = joint_q[static_cast<std::size_t>(s)];
  std::vector<double> pi(q.size());
  for (std::size_t a = 0; a < q.size(); ++a) pi[a] = std::exp((q[a] - value[static_cast<std::size_t>(s)]) / alpha);
  return pi;
}

namespace {

// r + gamma * E[V(s')]; terminal states do not bootstrap.
double backup(const FiniteMdp& mdp, const std::vector<double>& value, double gamma, int s, int a) {
  const auto su = static_cast<std::size_t>(s), au = static_cast<std::size_t>(a);
  double y = mdp.reward[su][au];
  if (mdp.is_terminal(s)) return y;
  const auto& p = mdp.transition[su][au];
  for (std::size_t t = 0; t < p.size(); ++t) y += gamma * p[t] * value[t];
  return y;
}

}  // namespace

TabularSoftModel soft_value_iteration(const FiniteMdp& mdp, double alpha, double gamma, double tol,
                                      int max_iterations) {
  mdp.validate();
  if (!(alpha > 0.0)) throw std::invalid_argument("soft value iteration: alpha must be positive");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("soft value iteration: gamma must be in [0, 1)");
  TabularSoftModel m;
  m.states = mdp.states;
  m.joint_actions = mdp.joint_actions();
  m.alpha = alpha;
  m.gamma = gamma;
  m.value.assign(static_cast<std::size_t>(mdp.states), 0.0);
  m.joint_q.assign(static_cast<std::size_t>(mdp.states), std::vector<double>(static_cast<std::size_t>(m.joint_actions)));
  for (int it = 1; it <= max_iterations; ++it) {
    std::vector<double> next(m.value.size());
    for (int s = 0; s < mdp.states; ++s) {
      auto& q = m.joint_q[static_cast<std::size_t>(s)];
      for (int a = 0; a < m.joint_actions; ++a) q[static_cast<std::size_t>(a)] = backup(mdp, m.value, gamma, s, a);
      next[static_cast<std::size_t>(s)] = soft_max(q, alpha);
    }
    double residual = 0.0;
    for (std::size_t s = 0; s < next.size(); ++s) residual = std::max(residual, std::abs(next[s] - m.value[s]));
    m.value = std::move(next);
    m.residuals.push_back(residual);
    m.iterations = it;
    if (residual < tol) {
      // Refresh Q against the converged values.
      for (int s = 0; s < mdp.states; ++s)
        for (int a = 0; a < m.joint_actions; ++a)
          m.joint_q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = backup(mdp, m.value, gamma, s, a);
      return m;
    }
  }
  throw std::runtime_error("soft value iteration did not converge after " + std::to_string(max_iterations) +
                           " sweeps; residual " + std::to_string(m.residuals.back()));
}

FiniteMdp make_random_mdp(int states, int dims, int bins, std::uint64_t seed) {
  check_grid(states, dims, bins);
  FiniteMdp mdp;
  mdp.states = states;
  mdp.dims = dims;
  mdp.bins = bins;
  const int na = mdp.joint_actions();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> gamma1(1.0);
  mdp.reward.assign(static_cast<std::size_t>(states), std::vector<double>(static_cast<std::size_t>(na)));
  mdp.transition.assign(static_cast<std::size_t>(states),
                        std::vector<std::vector<double>>(static_cast<std::size_t>(na), std::vector<double>(static_cast<std::size_t>(states))));
  for (auto& row : mdp.reward)
    for (double& r : row) r = unit(rng);
  for (auto& per_state : mdp.transition) {
    for (auto& row : per_state) {
      double total = 0.0;
      for (double& p : row) total += (p = gamma1(rng));
      for (double& p : row) p /= total;
    }
  }
  return mdp;
}

TabularData one_step_data(const OfflineDataset& dataset, const ActionSpec& spec) {
  spec.validate();
  if (spec.levels != 1) throw std::invalid_argument("one_step_data: tabular fits use a single-level lattice");
  TabularData data;
  data.dims = spec.dims;
  data.bins = spec.bins_per_level;
  for (const Transition& t : dataset.transitions()) {
    int joint = 0;
    for (int d = 0; d < spec.dims; ++d) joint = joint * spec.bins_per_level + t.action_discrete.at(d, 0);
    data.samples.push_back({0, joint, t.reward});
  }
  return data;
}

// ---- tabular ARSQ ---------------------------------------------------------

TabularArsq::TabularArsq(int states, int dims, int bins, double alpha)
    : states_(states), dims_(dims), bins_(bins), alpha_(alpha) {
  check_grid(states, dims, bins);
  if (!(alpha > 0.0)) throw std::invalid_argument("tabular ARSQ: alpha must be positive");
  value_.assign(static_cast<std::size_t>(states), 0.0);
  for (int d = 0; d < dims; ++d)
    adv_.emplace_back(static_cast<std::size_t>(states * ipow(bins, d) * bins), 0.0);
  project();
}

int TabularArsq::joint_actions() const { return ipow(bins_, dims_); }

std::size_t TabularArsq::offset(int dim, int s, int prefix) const {
  return static_cast<std::size_t>((s * ipow(bins_, dim) + prefix) * bins_);
}

double& TabularArsq::dim_adv(int dim, int s, int prefix, int bin) {
  return adv_[static_cast<std::size_t>(dim)][offset(dim, s, prefix) + static_cast<std::size_t>(bin)];
}

double TabularArsq::dim_adv(int dim, int s, int prefix, int bin) const {
  return adv_[static_cast<std::size_t>(dim)][offset(dim, s, prefix) + static_cast<std::size_t>(bin)];
}

double TabularArsq::joint_advantage(int s, int joint) const {
  double total = 0.0;
  for (int d = 0; d < dims_; ++d)
    total += dim_adv(d, s, joint_prefix(joint, d, dims_, bins_), joint_digit(joint, d, dims_, bins_));
  return total;
}

int TabularArsq::greedy(int s) const {
  int best = 0;
  for (int a = 1; a < joint_actions(); ++a)
    if (joint_q(s, a) > joint_q(s, best)) best = a;
  return best;
}

void TabularArsq::project() {
  const auto b = static_cast<std::size_t>(bins_);
  for (auto& table : adv_) {
    for (std::size_t start = 0; start < table.size(); start += b) {
      const std::span<double> head(table.data() + start, b);
      const double lse = soft_max(head, alpha_);
      for (double& v : head) v -= lse;
    }
  }
}

double TabularArsq::normalization_error() const {
  const auto b = static_cast<std::size_t>(bins_);
  double worst = 0.0;
  for (const auto& table : adv_) {
    for (std::size_t start = 0; start < table.size(); start += b) {
      double total = 0.0;
      for (std::size_t i = 0; i < b; ++i) total += std::exp(table[start + i] / alpha_);
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  return worst;
}

namespace {

void check_fit_options(const FitOptions& o) {
  if (o.steps < 0) throw std::invalid_argument("tabular fit: steps must be >= 0");
  if (!(o.lr > 0.0)) throw std::invalid_argument("tabular fit: lr must be positive");
}

// Apply gradient `err` (d loss / d Q(s, a)) to V and every head on the path of a.
void add_arsq_grad(const TabularArsq& model, TabularArsq& grad, int s, int a, double err) {
  grad.value(s) += err;
  for (int d = 0; d < model.dims(); ++d)
    grad.dim_adv(d, s, joint_prefix(a, d, model.dims(), model.bins()), joint_digit(a, d, model.dims(), model.bins())) += err;
}

template <class Grad>
void apply_grad(TabularArsq& model, const Grad& grad, double lr) {
  for (int s = 0; s < model.states(); ++s) {
    model.value(s) -= lr * grad.value(s);
    for (int d = 0; d < model.dims(); ++d) {
      const int prefixes = static_cast<int>(std::pow(model.bins(), d) + 0.5);
      for (int p = 0; p < prefixes; ++p)
        for (int b = 0; b < model.bins(); ++b) model.dim_adv(d, s, p, b) -= lr * grad.dim_adv(d, s, p, b);
    }
  }
}

TabularArsq zero_like(const TabularArsq& m) {
  TabularArsq g(m.states(), m.dims(), m.bins(), m.alpha());
  for (int s = 0; s < m.states(); ++s) {
    g.value(s) = 0.0;
    for (int d = 0; d < m.dims(); ++d) {
      const int prefixes = static_cast<int>(std::pow(m.bins(), d) + 0.5);
      for (int p = 0; p < prefixes; ++p)
        for (int b = 0; b < m.bins(); ++b) g.dim_adv(d, s, p, b) = 0.0;
    }
  }
  return g;
}

}  // namespace

TabularArsq tabular_arsq_fit(const FiniteMdp& mdp, double alpha, double gamma, const FitOptions& options) {
  mdp.validate();
  check_fit_options(options);
  TabularArsq model(mdp.states, mdp.dims, mdp.bins, alpha);
  const int na = mdp.joint_actions();
  for (int step = 0; step < options.steps; ++step) {
    std::vector<double> value(static_cast<std::size_t>(mdp.states));
    for (int s = 0; s < mdp.states; ++s) value[static_cast<std::size_t>(s)] = model.value(s);
    TabularArsq grad = zero_like(model);
    double worst = 0.0;
    for (int s = 0; s < mdp.states; ++s) {
      for (int a = 0; a < na; ++a) {
        const double err = model.joint_q(s, a) - backup(mdp, value, gamma, s, a);
        if (!std::isfinite(err)) throw nn::NumericalError("tabular ARSQ fit diverged at step " + std::to_string(step));
        worst = std::max(worst, std::abs(err));
        add_arsq_grad(model, grad, s, a, err);
      }
    }
    if (worst < options.tol) break;
    apply_grad(model, grad, options.lr);
    model.project();
  }
  return model;
}

TabularArsq tabular_arsq_fit(const TabularData& data, double alpha, const FitOptions& options) {
  check_fit_options(options);
  if (data.samples.empty()) throw std::invalid_argument("tabular ARSQ fit: no samples");
  TabularArsq model(data.states, data.dims, data.bins, alpha);
  const double scale = 1.0 / static_cast<double>(data.samples.size());
  for (int step = 0; step < options.steps; ++step) {
    TabularArsq grad = zero_like(model);
    double worst = 0.0;
    for (const TabularSample& x : data.samples) {
      const double err = model.joint_q(x.state, x.action) - x.reward;
      if (!std::isfinite(err)) throw nn::NumericalError("tabular ARSQ fit diverged at step " + std::to_string(step));
      worst = std::max(worst, std::abs(err));
      add_arsq_grad(model, grad, x.state, x.action, err * scale);
    }
    if (worst < options.tol) break;
    apply_grad(model, grad, options.lr);
    model.project();
  }
  return model;
}

// ---- independent baseline -------------------------------------------------

TabularIndependent::TabularIndependent(int states, int dims, int bins) : states_(states), dims_(dims), bins_(bins) {
  check_grid(states, dims, bins);
  q_.assign(static_cast<std::size_t>(dims * states * bins), 0.0);
}

int TabularIndependent::joint_actions() const { return ipow(bins_, dims_); }

double& TabularIndependent::q(int dim, int s, int bin) {
  return q_[static_cast<std::size_t>((dim * states_ + s) * bins_ + bin)];
}

double TabularIndependent::q(int dim, int s, int bin) const {
  return q_[static_cast<std::size_t>((dim * states_ + s) * bins_ + bin)];
}

double TabularIndependent::joint_q(int s, int joint) const {
  double total = 0.0;
  for (int d = 0; d < dims_; ++d) total += q(d, s, joint_digit(joint, d, dims_, bins_));
  return total / dims_;
}

int TabularIndependent::greedy(int s) const {
  int best = 0;
  for (int a = 1; a < joint_actions(); ++a)
    if (joint_q(s, a) > joint_q(s, best)) best = a;
  return best;
}

TabularIndependent tabular_independent_fit(const TabularData& data, const FitOptions& options, IndependentLoss loss) {
  check_fit_options(options);
  if (data.samples.empty()) throw std::invalid_argument("tabular independent fit: no samples");
  TabularIndependent model(data.states, data.dims, data.bins);
  const double scale = 1.0 / static_cast<double>(data.samples.size());
  for (int step = 0; step < options.steps; ++step) {
    TabularIndependent grad(data.states, data.dims, data.bins);
    double worst = 0.0;
    for (const TabularSample& x : data.samples) {
      if (loss == IndependentLoss::joint) {
        const double err = model.joint_q(x.state, x.action) - x.reward;
        worst = std::max(worst, std::abs(err));
        for (int d = 0; d < data.dims; ++d)
          grad.q(d, x.state, joint_digit(x.action, d, data.dims, data.bins)) += err * scale / data.dims;
      } else {
        for (int d = 0; d < data.dims; ++d) {
          const int bin = joint_digit(x.action, d, data.dims, data.bins);
          const double err = model.q(d, x.state, bin) - x.reward;
          worst = std::max(worst, std::abs(err));
          grad.q(d, x.state, bin) += err * scale;
        }
      }
    }
    if (!std::isfinite(worst)) throw nn::NumericalError("tabular independent fit diverged at step " + std::to_string(step));
    if (worst < options.tol) break;
    for (int d = 0; d < data.dims; ++d)
      for (int s = 0; s < data.states; ++s)
        for (int b = 0; b < data.bins; ++b) model.q(d, s, b) -= options.lr * grad.q(d, s, b);
  }
  return model;
}

double q_landscape_error(const JointQ& model, const ModeLandscape& landscape, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("q_landscape_error: n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double total = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double a[2] = {unit(rng), unit(rng)};
    total += std::abs(model(a) - landscape.reward(a));
  }
  return total / n_samples;
}

void write_mae_csv(const std::filesystem::path& path, std::span<const MaeRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "method,seed,mae\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const MaeRow& r : rows) out << r.method << ',' << r.seed << ',' << r.mae << '\n';
}

}  // namespace arsq::oracle
