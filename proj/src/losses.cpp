#include "arsq/losses.hpp"

#include <stdexcept>
#include <utility>

namespace arsq {

void LossConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (bc_weight < 0.0) throw std::invalid_argument("bc_weight must be >= 0");
}

std::vector<Parameter*> ArsqNetworks::online_parameters() {
  std::vector<Parameter*> out;
  for (auto& a : adv)
    for (Parameter* p : a.parameters()) out.push_back(p);
  for (auto& v : values.online)
    for (Parameter* p : v.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> ArsqNetworks::all_parameters() {
  std::vector<Parameter*> out = online_parameters();
  for (auto& a : adv_target)
    for (Parameter* p : a.parameters()) out.push_back(p);
  for (auto& v : values.target)
    for (Parameter* p : v.parameters()) out.push_back(p);
  return out;
}

void ArsqNetworks::update_targets(double rho) {
  for (std::size_t i = 0; i < 2; ++i) {
    const auto on = std::as_const(adv[i]).parameters();
    const auto tg = adv_target[i].parameters();
    nn::ema_update(tg, on, rho);
  }
  values.update_targets(rho);
}

double td_target(double reward, bool done, std::span<const double> next_obs, ValueNetworkPair& values,
                 double gamma) {
  if (done) return reward;
  return reward + gamma * values.target_min(row_matrix(next_obs))(0);
}

ad::Vector td_targets(const Batch& batch, ValueNetworkPair& values, double gamma) {
  ad::Vector y = batch.reward;
  if (batch.empty()) return y;
  const ad::Vector next = values.target_min(batch.next_obs);
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (!batch.done[i]) y(static_cast<Eigen::Index>(i)) += gamma * next(static_cast<Eigen::Index>(i));
  return y;
}

Var squared_td_error(Var value, Var advantage, const ad::Vector& y) {
  Graph& g = value.graph();
  Matrix ym(y.size(), 1);
  ym.col(0) = y;
  Var err = ad::sub(ad::add(value, advantage), g.constant(std::move(ym)));
  return ad::scale(ad::square(err), 0.5);
}

Var rl_loss(Graph& g, nn::DenseNetwork& value, AdvantageNetwork& adv, const Matrix& obs,
            std::span<const DiscreteAction> actions, const ad::Vector& y) {
  return squared_td_error(value.forward(g, obs), adv.joint_advantage(g, obs, actions), y);
}

Var margin_terms(Var advantages, std::span<const int> expert, double margin) {
  Var gaps = ad::sub_col(advantages, ad::gather_cols(advantages, expert));
  return ad::row_sum(ad::clamp_min(gaps, margin));
}

Var variant_terms(Var advantages, std::span<const int> expert, double margin) {
  Var others = ad::logsumexp_rows_excluding(advantages, expert, 1.0);
  return ad::clamp_min(ad::sub(others, ad::gather_cols(advantages, expert)), margin);
}

namespace {

std::vector<int> head_indices(const FactorLayout& layout, std::span<const DiscreteAction> actions, std::size_t f) {
  std::vector<int> idx(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) idx[i] = layout.index_of(actions[i], f);
  return idx;
}

template <typename TermFn>
Var bc_loss_impl(Graph& g, AdvantageNetwork& adv, const Matrix& obs, std::span<const DiscreteAction> expert,
                 TermFn term) {
  Var total;
  for (std::size_t f = 0; f < adv.layout().size(); ++f) {
    Var t = term(adv.head_advantages(g, obs, expert, f), head_indices(adv.layout(), expert, f));
    total = f == 0 ? t : ad::add(total, t);
  }
  return total;
}

Matrix column(const ad::Vector& v) {
  Matrix m(v.size(), 1);
  m.col(0) = v;
  return m;
}

struct BatchTerms {
  Var rl;  // n x 1, summed over estimators
  Var bc;  // n x 1, summed over estimators; only for demo batches
  double v_sum = 0.0;
};

BatchTerms batch_terms(Graph& g, const Batch& b, ArsqNetworks& nets, const LossConfig& cfg, bool with_bc) {
  BatchTerms out;
  const ad::Vector y = td_targets(b, nets.values, cfg.gamma);
  const Var yv = g.constant(column(y));
  for (std::size_t i = 0; i < 2; ++i) {
    AdvantageNetwork& adv = nets.adv[i];
    const FactorLayout& layout = adv.layout();
    Var joint, bc;
    for (std::size_t f = 0; f < layout.size(); ++f) {
      Var a = adv.head_advantages(g, b.obs, b.actions, f);
      const std::vector<int> idx = head_indices(layout, b.actions, f);
      if (cfg.use_rl) {
        Var chosen = ad::gather_cols(a, idx);
        joint = f == 0 ? chosen : ad::add(joint, chosen);
      }
      if (with_bc) {
        Var t = cfg.bc_variant ? variant_terms(a, idx, cfg.bc_margin) : margin_terms(a, idx, cfg.bc_margin);
        bc = f == 0 ? t : ad::add(bc, t);
      }
    }
    if (cfg.use_rl) {
      Var v = nets.values.online[i].forward(g, b.obs);
      if (i == 0) out.v_sum = v.value().sum();
      Var err = ad::sub(ad::add(v, joint), yv);
      Var l = ad::scale(ad::square(err), 0.5);
      out.rl = i == 0 ? l : ad::add(out.rl, l);
    }
    if (with_bc) out.bc = i == 0 ? bc : ad::add(out.bc, bc);
  }
  return out;
}

}  // namespace

Var bc_margin_loss(Graph& g, AdvantageNetwork& adv, const Matrix& obs, std::span<const DiscreteAction> expert,
                   double margin) {
  return bc_loss_impl(g, adv, obs, expert,
                      [margin](Var a, const std::vector<int>& idx) { return margin_terms(a, idx, margin); });
}

Var bc_variant_loss(Graph& g, AdvantageNetwork& adv, const Matrix& obs, std::span<const DiscreteAction> expert,
                    double margin) {
  return bc_loss_impl(g, adv, obs, expert,
                      [margin](Var a, const std::vector<int>& idx) { return variant_terms(a, idx, margin); });
}

LossBreakdown combined_loss(Graph& g, const Batch& demo, const Batch& replay, ArsqNetworks& nets,
                            const LossConfig& config) {
  if (demo.empty() && replay.empty()) throw std::invalid_argument("combined_loss: both batches are empty");
  if (!config.use_rl && demo.empty()) throw std::invalid_argument("combined_loss: BC-only loss needs demo data");
  LossBreakdown out;
  Var total;
  bool have_total = false;
  double rl_sum = 0.0;
  std::size_t rl_rows = 0;
  double v_sum = 0.0;
  auto accumulate = [&](Var term) {
    total = have_total ? ad::add(total, term) : term;
    have_total = true;
  };
  if (!demo.empty()) {
    const BatchTerms t = batch_terms(g, demo, nets, config, true);
    const double inv = 1.0 / static_cast<double>(demo.size());
    if (config.use_rl) {
      accumulate(ad::scale(ad::sum(t.rl), inv));
      rl_sum += t.rl.value().sum();
      rl_rows += demo.size();
      v_sum += t.v_sum;
    }
    accumulate(ad::scale(ad::sum(t.bc), config.bc_weight * inv));
    out.bc = t.bc.value().sum() * inv;
  }
  if (!replay.empty() && config.use_rl) {
    const BatchTerms t = batch_terms(g, replay, nets, config, false);
    accumulate(ad::scale(ad::sum(t.rl), 1.0 / static_cast<double>(replay.size())));
    rl_sum += t.rl.value().sum();
    rl_rows += replay.size();
    v_sum += t.v_sum;
  }
  if (!have_total) throw std::invalid_argument("combined_loss: nothing to optimize");
  out.total = total;
  out.rl = rl_rows > 0 ? rl_sum / static_cast<double>(rl_rows) : 0.0;
  out.v_mean = rl_rows > 0 ? v_sum / static_cast<double>(rl_rows) : 0.0;
  return out;
}

}  // namespace arsq
