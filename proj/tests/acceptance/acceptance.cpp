// Acceptance suite. Each criterion prints one PASS/FAIL line.
//
//   arsq_acceptance            run every criterion
//   arsq_acceptance 3 6        run selected criteria
//
// Exit status is 0 only when every selected criterion passes.

#include "arsq/action_codec.hpp"
#include "arsq/case_studies.hpp"
#include "arsq/losses.hpp"
#include "arsq/model.hpp"
#include "arsq/nn.hpp"
#include "arsq/oracle.hpp"
#include "arsq/replay.hpp"
#include "arsq/trainer.hpp"

#include "fd_check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace arsq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("arsq_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DiscreteAction random_action(const ActionSpec& spec, std::mt19937_64& r) {
  std::uniform_int_distribution<int> digit(0, spec.bins_per_level - 1);
  DiscreteAction a(spec.dims, spec.levels);
  for (int d = 0; d < spec.dims; ++d)
    for (int l = 0; l < spec.levels; ++l) a.at(d, l) = digit(r);
  return a;
}

// Small twin networks with targets copied from the online weights.
ArsqNetworks small_networks(std::uint64_t seed, const ActionSpec& spec, double alpha, int obs_width = 3) {
  nn::Rng rng(seed);
  AdvantageNetworkConfig ac;
  ac.obs_width = obs_width;
  ac.action_spec = spec;
  ac.hidden_widths = {8};
  ac.alpha = alpha;
  nn::DenseNetworkConfig vc;
  vc.input_width = obs_width;
  vc.hidden_widths = {8};
  ArsqNetworks nets;
  nets.adv = {AdvantageNetwork("adv1", ac, rng), AdvantageNetwork("adv2", ac, rng)};
  nets.adv_target = {AdvantageNetwork("target/adv1", ac, rng), AdvantageNetwork("target/adv2", ac, rng)};
  nets.values = ValueNetworkPair(vc, rng);
  nets.update_targets(0.0);
  return nets;
}

Batch random_batch(std::mt19937_64& r, std::size_t n, const ActionSpec& spec, int obs_width = 3) {
  std::normal_distribution<double> g(0.0, 1.0);
  Batch b;
  b.obs = Matrix(static_cast<Eigen::Index>(n), obs_width);
  b.next_obs = Matrix(static_cast<Eigen::Index>(n), obs_width);
  b.reward = ad::Vector(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (int c = 0; c < obs_width; ++c) {
      b.obs(row, c) = g(r);
      b.next_obs(row, c) = g(r);
    }
    b.actions.push_back(random_action(spec, r));
    b.reward(row) = g(r);
    b.done.push_back(r() % 4 == 0);
  }
  return b;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- 1 ----------------------------------------------------------------------

Outcome normalization_invariant() {
  const ConditioningMode modes[] = {ConditioningMode::coarse_outer_dim_inner, ConditioningMode::dim_outer_coarse_inner,
                                    ConditioningMode::no_cf_cond,             ConditioningMode::no_dim_cond,
                                    ConditioningMode::no_cf,                  ConditioningMode::plain};
  std::mt19937_64 r(101);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> bins(2, 5), levels(1, 3), dims(1, 3);
  const double alphas[] = {0.01, 0.05, 0.5, 1.0};
  double worst = 0.0;
  int probes = 0;
  while (probes < 1000) {
    AdvantageNetworkConfig c;
    c.obs_width = 4;
    c.action_spec = ActionSpec::uniform(dims(r), -1.0, 1.0, bins(r), levels(r));
    c.mode = modes[r() % std::size(modes)];
    c.hidden_widths = {16, 16};
    c.alpha = alphas[r() % std::size(alphas)];
    nn::Rng rng(r());
    AdvantageNetwork net("adv", c, rng);
    // Scale weights so head scores span several multiples of alpha.
    const double scale = std::exp(g(r));
    for (Parameter* p : net.parameters()) p->value() *= scale;
    const FactorLayout& layout = net.layout();
    for (int k = 0; k < 20 && probes < 1000; ++k, ++probes) {
      std::vector<double> obs(4);
      for (double& v : obs) v = 2.0 * g(r);
      const std::size_t f = r() % layout.size();
      ActionPrefix prefix = ActionPrefix::empty(layout);
      prefix.action = random_action(layout.spec(), r);
      for (std::size_t s = 0; s < f; ++s) prefix.chosen[s] = true;
      const auto adv = dimensional_advantages(net, obs, prefix, layout[f].level, layout[f].dim);
      double z = 0.0;
      for (double v : adv) z += std::exp(v / c.alpha);
      worst = std::max(worst, std::abs(z - 1.0));
    }
  }
  return {worst < 1e-6, fmt("%d probes, max |sum exp(A/alpha) - 1| = %.3g (tol 1e-6)", probes, worst)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome advantage_identity() {
  const oracle::FiniteMdp mdp = oracle::make_random_mdp(3, 2, 3, 0);
  const double alpha = 0.05, gamma = 0.9;
  const oracle::TabularSoftModel vi = oracle::soft_value_iteration(mdp, alpha, gamma);
  const oracle::TabularArsq fit = oracle::tabular_arsq_fit(mdp, alpha, gamma);
  double gap = 0.0;
  for (int s = 0; s < mdp.states; ++s) {
    for (int a = 0; a < mdp.joint_actions(); ++a) {
      const double q = vi.joint_q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
      gap = std::max(gap, std::abs(fit.joint_advantage(s, a) - (q - vi.value[static_cast<std::size_t>(s)])));
    }
  }
  return {gap < 1e-3, fmt("max |sum_d A_d - (Q - V)| = %.3g over 27 (s, a) (tol 1e-3)", gap)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome motivating_example() {
  int arsq_ok = 0, indep_wrong = 0;
  std::string cells;
  for (std::uint64_t seed : {0, 1, 2}) {
    const ToyResult t = case_study_toy({}, seed);
    arsq_ok += t.arsq.optimal();
    indep_wrong += !t.independent.optimal();
    cells += fmt(" seed %d: arsq (%d,%d) indep (%d,%d);", static_cast<int>(seed), t.arsq.argmax_cell[0],
                 t.arsq.argmax_cell[1], t.independent.argmax_cell[0], t.independent.argmax_cell[1]);
  }
  return {arsq_ok == 3 && indep_wrong == 3,
          fmt("arsq optimal %d/3, independent off-optimal %d/3;", arsq_ok, indep_wrong) + cells};
}

// ---- 4 ----------------------------------------------------------------------

Outcome landscape_ordering() {
  const LandscapeResult res = case_study_landscape({}, {0, 1, 2});
  for (const auto& run : res.runs)
    if (run.diverged) return {false, run.method + " diverged: " + run.error};
  const double indep = res.mean_mae("independent");
  const double no_cf = res.mean_mae("arsq_no_cf");
  const double arsq = res.mean_mae("arsq");
  const bool ordered = indep > no_cf && no_cf > arsq;
  const bool ratio = indep >= 10.0 * arsq;
  return {ordered && ratio, fmt("mean MAE independent %.4f, arsq_no_cf %.4f, arsq %.4f; ordering %s; ratio %.2f "
                                "(need >= 10)",
                                indep, no_cf, arsq, ordered ? "holds" : "violated", indep / arsq)};
}

// ---- 5 ----------------------------------------------------------------------

Outcome loss_gradients() {
  std::mt19937_64 r(505);
  std::uniform_int_distribution<int> bins(2, 4), levels(1, 2);
  std::uniform_real_distribution<double> margin(-1.0, -0.01);
  const double alphas[] = {0.05, 0.1, 0.5};
  double worst = 0.0;
  int probes = 0;
  for (; probes < 100; ++probes) {
    const ActionSpec spec = ActionSpec::uniform(2, -1.0, 1.0, bins(r), levels(r));
    const double alpha = alphas[r() % std::size(alphas)];
    ArsqNetworks nets = small_networks(r(), spec, alpha);
    const Batch batch = random_batch(r, 3, spec);
    const double cm = margin(r);
    const ad::Vector y = td_targets(batch, nets.values, 0.99);
    AdvantageNetwork& adv = nets.adv[0];
    nn::DenseNetwork& value = nets.values.online[0];
    std::vector<Parameter*> rl_params = adv.parameters();
    for (Parameter* p : value.parameters()) rl_params.push_back(p);
    double err = 0.0;
    switch (probes % 3) {
      case 0:
        err = fdcheck::relative_error(
            [&](Graph& g) { return ad::mean(rl_loss(g, value, adv, batch.obs, batch.actions, y)); }, rl_params);
        break;
      case 1:
        err = fdcheck::relative_error(
            [&](Graph& g) { return ad::mean(bc_margin_loss(g, adv, batch.obs, batch.actions, cm)); },
            adv.parameters());
        break;
      default:
        err = fdcheck::relative_error(
            [&](Graph& g) { return ad::mean(bc_variant_loss(g, adv, batch.obs, batch.actions, cm)); },
            adv.parameters());
        break;
    }
    worst = std::max(worst, err);
  }
  return {worst < 1e-4, fmt("%d probes over rl/margin/variant losses, max relative error %.3g (tol 1e-4)", probes,
                            worst)};
}

// ---- 6 ----------------------------------------------------------------------

Outcome discretization_round_trip() {
  std::int64_t checked = 0;
  bool identity = true;
  double worst_ratio = 0.0;
  std::mt19937_64 r(606);
  for (int b : {2, 3, 5, 7}) {
    for (int l : {1, 2, 3}) {
      const ActionSpec spec = ActionSpec::uniform(1, -1.0, 1.0, b, l);
      for (std::int64_t k = 0; k < spec.fine_bins(); ++k, ++checked)
        identity = identity && level_recompose(spec, level_decompose(spec, k)) == k;
      const ActionSpec wide = ActionSpec::uniform(2, -2.0, 3.0, b, l);
      std::uniform_real_distribution<double> u(-2.0, 3.0);
      for (int i = 0; i < 10000 / 12 + 1; ++i) {
        const std::vector<double> a{u(r), u(r)};
        const ContinuousAction back = decode(wide, encode(wide, a));
        for (int d = 0; d < 2; ++d)
          worst_ratio = std::max(worst_ratio, std::abs(back[static_cast<std::size_t>(d)] -
                                                       a[static_cast<std::size_t>(d)]) /
                                                  (0.5 * wide.fine_width(d)));
      }
    }
  }
  const bool quant = worst_ratio <= 1.0 + 1e-12;
  return {identity && quant,
          fmt("%lld global indices round-trip %s; max quantization error %.6f half-widths over %d actions",
              static_cast<long long>(checked), identity ? "exactly" : "with mismatches", worst_ratio,
              12 * (10000 / 12 + 1))};
}

// ---- 7 ----------------------------------------------------------------------

Outcome ema_contracts() {
  std::mt19937_64 r(707);
  const ActionSpec spec = ActionSpec::uniform(2, -1.0, 1.0, 3, 2);
  ArsqNetworks nets = small_networks(r(), spec, 0.1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Parameter* p : nets.all_parameters())
    for (Eigen::Index i = 0; i < p->value().size(); ++i) p->value().data()[i] = g(r);

  auto target_values = [&] {
    std::vector<Matrix> out;
    for (auto& n : nets.adv_target)
      for (Parameter* p : n.parameters()) out.push_back(p->value());
    for (auto& n : nets.values.target)
      for (Parameter* p : n.parameters()) out.push_back(p->value());
    return out;
  };
  auto online_values = [&] {
    std::vector<Matrix> out;
    for (auto& n : nets.adv)
      for (Parameter* p : n.parameters()) out.push_back(p->value());
    for (auto& n : nets.values.online)
      for (Parameter* p : n.parameters()) out.push_back(p->value());
    return out;
  };

  const auto before = target_values();
  nets.update_targets(1.0);
  const bool frozen = target_values() == before;
  nets.update_targets(0.0);
  const bool copied = target_values() == online_values();

  // Perturb the online side again and check a backward pass through the
  // combined loss leaves target gradients at zero.
  for (Parameter* p : nets.online_parameters())
    for (Eigen::Index i = 0; i < p->value().size(); ++i) p->value().data()[i] += 0.1 * g(r);
  std::vector<Parameter*> targets;
  for (auto& n : nets.adv_target)
    for (Parameter* p : n.parameters()) targets.push_back(p);
  for (auto& n : nets.values.target)
    for (Parameter* p : n.parameters()) targets.push_back(p);
  for (Parameter* p : nets.all_parameters()) p->zero_grad();
  const Batch demo = random_batch(r, 5, spec);
  const Batch replay = random_batch(r, 5, spec);
  LossConfig cfg;
  cfg.alpha = 0.1;
  double online_grad = 0.0, target_grad = 0.0;
  {
    Graph graph;
    graph.backward(combined_loss(graph, demo, replay, nets, cfg).total);
  }
  for (Parameter* p : nets.online_parameters()) online_grad += p->grad().size() ? p->grad().squaredNorm() : 0.0;
  for (Parameter* p : targets) target_grad += p->grad().size() ? p->grad().squaredNorm() : 0.0;
  const bool isolated = target_grad == 0.0 && online_grad > 0.0;
  return {frozen && copied && isolated,
          fmt("rho=1 frozen %s, rho=0 copy %s, target grad norm^2 %.3g (online %.3g)", frozen ? "exact" : "NO",
              copied ? "exact" : "NO", target_grad, online_grad)};
}

// ---- 8 ----------------------------------------------------------------------

TrainConfig point_mass_config(std::uint64_t seed) {
  TrainConfig c;
  c.env = "point_mass";
  c.demo_episodes = 50;
  c.demo_policy = "medium";
  c.seed = seed;
  return c;
}

Outcome end_to_end_training() {
  double arsq_sum = 0.0, bc_sum = 0.0, slowest = 0.0;
  bool each = true;
  std::string per_seed;
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult arsq = train(point_mass_config(seed), scratch(fmt("train_%d", static_cast<int>(seed))));
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    TrainConfig bc = point_mass_config(seed);
    bc.total_env_steps = 0;
    bc.use_rl = false;
    const TrainResult clone = train(bc, scratch(fmt("bc_%d", static_cast<int>(seed))));
    arsq_sum += arsq.final_eval.success_rate;
    bc_sum += clone.final_eval.success_rate;
    each = each && arsq.final_eval.success_rate >= 0.8;
    per_seed += fmt(" seed %d: %.2f vs %.2f;", static_cast<int>(seed), arsq.final_eval.success_rate,
                    clone.final_eval.success_rate);
  }
  const double arsq_mean = arsq_sum / 3.0, bc_mean = bc_sum / 3.0;
  const bool fast = slowest < 600.0;
  return {each && arsq_mean > bc_mean && fast,
          fmt("success arsq %.2f vs bc-only %.2f (mean over 3 seeds, each arsq >= 0.8 %s), slowest seed %.0f s;",
              arsq_mean, bc_mean, each ? "yes" : "no", slowest) +
              per_seed};
}

// ---- 9 ----------------------------------------------------------------------

Outcome quality_ranking() {
  std::mt19937_64 r(909);
  bool disjoint = true, covered = true, ordered = true;
  int datasets = 0;
  for (int n = 3; n <= 120; ++n) {
    for (int shape = 0; shape < 3; ++shape, ++datasets) {
      std::vector<double> returns(static_cast<std::size_t>(n));
      std::normal_distribution<double> normal(0.0, 10.0);
      std::exponential_distribution<double> expo(0.2);
      std::uniform_int_distribution<int> ties(0, 3);
      for (double& v : returns) v = shape == 0 ? normal(r) : shape == 1 ? -expo(r) : ties(r);
      std::vector<std::vector<std::size_t>> picks;
      std::set<std::size_t> seen;
      std::size_t total = 0;
      for (Segment s : {Segment::top, Segment::middle, Segment::bottom}) {
        picks.push_back(rank_select(returns, s, 1.0 / 3.0));
        total += picks.back().size();
        seen.insert(picks.back().begin(), picks.back().end());
      }
      disjoint = disjoint && seen.size() == total;
      covered = covered && seen.size() + 2 >= static_cast<std::size_t>(n);
      // Every top return is at least every middle return, and so on.
      for (std::size_t a = 0; a + 1 < picks.size(); ++a)
        for (std::size_t hi : picks[a])
          for (std::size_t lo : picks[a + 1]) ordered = ordered && returns[hi] >= returns[lo];
    }
  }

  TrainConfig c = point_mass_config(0);
  c.demo_segment = Segment::bottom;
  c.demo_fraction = 0.3;
  const TrainResult res = train(c, scratch("bottom"));
  const double success = res.final_eval.success_rate;
  return {disjoint && covered && ordered && success >= 0.5,
          fmt("%d synthetic datasets: disjoint %s, |union| >= N-2 %s, ranked %s; bottom-30%% run success %.2f "
              "(need >= 0.5)",
              datasets, disjoint ? "yes" : "no", covered ? "yes" : "no", ordered ? "yes" : "no", success)};
}

// ---- 10 ---------------------------------------------------------------------

Outcome determinism() {
  TrainConfig c = point_mass_config(7);
  c.total_env_steps = 2000;
  c.eval_every = 500;
  const TrainResult a = train(c, scratch("det_a"));
  const TrainResult b = train(c, scratch("det_b"));
  const std::string ma = read_file(a.metrics_path), mb = read_file(b.metrics_path);
  const bool same = !ma.empty() && ma == mb;
  return {same, fmt("metrics.csv %zu vs %zu bytes, %s", ma.size(), mb.size(), same ? "identical" : "different")};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "normalization invariant", 5, normalization_invariant},
      {2, "advantage identity vs soft value iteration", 30, advantage_identity},
      {3, "motivating example argmax", 60, motivating_example},
      {4, "landscape error ordering", 600, landscape_ordering},
      {5, "loss gradients vs finite differences", 120, loss_gradients},
      {6, "discretization round trip", 10, discretization_round_trip},
      {7, "ema and target contracts", 5, ema_contracts},
      {8, "end-to-end point-mass training", 1800, end_to_end_training},
      {9, "quality ranking protocol", 600, quality_ranking},
      {10, "determinism", 300, determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    char* end = nullptr;
    const long id = std::strtol(argv[i], &end, 10);
    if (*end != '\0' || id < 1 || id > static_cast<long>(criteria().size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    selected.insert(static_cast<int>(id));
  }
  int failed = 0;
  for (const Criterion& c : criteria()) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" [over budget: %.1f s > %.0f s]", secs, c.budget_s);
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s (%.1f s): %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
