#include "arsq/case_studies.hpp"

#include "arsq/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace arsq {

namespace {

std::array<int, 2> cell_of(int joint, int bins) { return {joint / bins, joint % bins}; }

template <typename Model>
LandscapeGrid cell_grid(const Model& model, const ActionSpec& spec) {
  LandscapeGrid g;
  g.resolution = spec.bins_per_level;
  for (int i = 0; i < spec.bins_per_level; ++i) {
    for (int j = 0; j < spec.bins_per_level; ++j) {
      g.a1.push_back(bin_center(spec, 0, i));
      g.a2.push_back(bin_center(spec, 1, j));
      g.q.push_back(model.joint_q(0, i * spec.bins_per_level + j));
    }
  }
  return g;
}

void write_verdicts(const std::filesystem::path& path, std::uint64_t seed, const std::vector<ToyVerdict>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "method,seed,argmax_cell_a1,argmax_cell_a2,optimal_cell_a1,optimal_cell_a2,is_optimal\n";
  for (const ToyVerdict& v : rows)
    out << v.method << ',' << seed << ',' << v.argmax_cell[0] << ',' << v.argmax_cell[1] << ',' << v.optimal_cell[0]
        << ',' << v.optimal_cell[1] << ',' << (v.optimal() ? "true" : "false") << '\n';
}

}  // namespace

ToyResult case_study_toy(const std::filesystem::path& out_dir, std::uint64_t seed, const ToyOptions& options) {
  OneStepEnv env("toy", ModeLandscape::motivating(), 2, 1);
  const ActionSpec& spec = env.spec().action_spec;
  const OfflineDataset data = generate_demos(env, PolicyKind::mode_mix, options.samples, seed);
  const oracle::TabularData table = oracle::one_step_data(data, spec);

  const oracle::TabularArsq arsq = oracle::tabular_arsq_fit(table, options.alpha, options.fit);
  const oracle::TabularIndependent indep = oracle::tabular_independent_fit(table, options.fit);

  const Mode& best = env.landscape().modes[env.landscape().best_mode()];
  const DiscreteAction best_cell = encode(spec, std::vector<double>{best.center[0], best.center[1]});
  const std::array<int, 2> optimal{best_cell.at(0, 0), best_cell.at(1, 0)};

  ToyResult out;
  out.seed = seed;
  out.arsq = {"arsq", cell_of(arsq.greedy(0), 2), optimal};
  out.independent = {"independent", cell_of(indep.greedy(0), 2), optimal};
  out.arsq_grid = cell_grid(arsq, spec);
  out.independent_grid = cell_grid(indep, spec);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_dataset(out_dir / "toy_dataset.jsonl", data);
    write_grid_csv(out_dir / "toy_grid_arsq.csv", out.arsq_grid);
    write_grid_csv(out_dir / "toy_grid_independent.csv", out.independent_grid);
    write_verdicts(out_dir / "toy_verdict.csv", seed, {out.arsq, out.independent});
  }
  return out;
}

// ---- landscape --------------------------------------------------------------

double LandscapeResult::mean_mae(const std::string& method) const {
  double total = 0.0;
  int n = 0;
  for (const auto& r : runs) {
    if (r.method != method) continue;
    total += r.mae;
    ++n;
  }
  return n > 0 ? total / n : std::numeric_limits<double>::quiet_NaN();
}

namespace {

// A regressor over the discretized landscape, queried one action at a time.
class LandscapeModel {
 public:
  virtual ~LandscapeModel() = default;
  virtual void train_step(std::span<const Transition* const> rows) = 0;
  virtual double predict(std::span<const double> action) = 0;
};

// One q-head per dimension over all fine bins, each regressed toward the
// reward on its own; the joint estimate is their mean.
class IndependentModel : public LandscapeModel {
 public:
  IndependentModel(const ActionSpec& spec, const LandscapeOptions& o, std::uint64_t seed) : spec_(spec) {
    nn::Rng rng(seed);
    nn::DenseNetworkConfig c;
    c.input_width = 2;
    c.hidden_widths = o.hidden_widths;
    c.output_width = static_cast<int>(spec.fine_bins());
    for (int d = 0; d < spec.dims; ++d) heads_.emplace_back("indep/q" + std::to_string(d + 1), c, rng);
    std::vector<Parameter*> params;
    for (auto& h : heads_)
      for (Parameter* p : h.parameters()) params.push_back(p);
    optimizer_ = std::make_unique<nn::Adam>(params, nn::AdamOptions{o.learning_rate});
  }

  void train_step(std::span<const Transition* const> rows) override {
    const Batch b = make_batch(rows);
    Graph g;
    Matrix y(static_cast<Eigen::Index>(b.size()), 1);
    y.col(0) = b.reward;
    const Var target = g.constant(y);
    Var total;
    for (int d = 0; d < spec_.dims; ++d) {
      std::vector<int> idx(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) idx[i] = static_cast<int>(b.actions[i].global(d, spec_.bins_per_level));
      Var q = ad::gather_cols(heads_[static_cast<std::size_t>(d)].forward(g, b.obs), idx);
      Var l = ad::mean(ad::scale(ad::square(ad::sub(q, target)), 0.5));
      total = d == 0 ? l : ad::add(total, l);
    }
    if (!std::isfinite(total.scalar())) throw nn::NumericalError("independent regression diverged");
    optimizer_->zero_grad();
    g.backward(total);
    optimizer_->step();
  }

  double predict(std::span<const double> action) override {
    const DiscreteAction a = encode(spec_, action);
    const Matrix obs = Matrix::Zero(1, 2);
    double total = 0.0;
    for (int d = 0; d < spec_.dims; ++d)
      total += heads_[static_cast<std::size_t>(d)].predict(obs)(0, a.global(d, spec_.bins_per_level));
    return total / spec_.dims;
  }

 private:
  ActionSpec spec_;
  std::vector<nn::DenseNetwork> heads_;
  std::unique_ptr<nn::Adam> optimizer_;
};

// Twin advantage/value estimators trained on the soft TD loss; every
// transition is terminal so the target is the reward itself.
class ArsqModel : public LandscapeModel {
 public:
  ArsqModel(const EnvSpec& env_spec, ConditioningMode mode, const LandscapeOptions& o, std::uint64_t seed)
      : spec_(env_spec.action_spec) {
    TrainConfig c;
    c.env = "landscape";
    c.bins = o.bins;
    c.levels = o.levels;
    c.alpha = o.alpha;
    c.conditioning = mode;
    c.hidden_widths = o.hidden_widths;
    c.seed = seed;
    nets_ = build_networks(c, env_spec);
    loss_.alpha = o.alpha;
    optimizer_ = std::make_unique<nn::Adam>(nets_.online_parameters(), nn::AdamOptions{o.learning_rate});
  }

  void train_step(std::span<const Transition* const> rows) override {
    const Batch replay = make_batch(rows);
    Graph g;
    const LossBreakdown l = combined_loss(g, Batch{}, replay, nets_, loss_);
    if (!std::isfinite(l.total.scalar())) throw nn::NumericalError("ARSQ regression diverged");
    optimizer_->zero_grad();
    g.backward(l.total);
    optimizer_->step();
  }

  double predict(std::span<const double> action) override {
    const DiscreteAction a = encode(spec_, action);
    const std::vector<double> obs{0.0, 0.0};
    double total = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      total += nets_.values.online[i].predict(row_matrix(obs))(0, 0) + joint_advantage(nets_.adv[i], obs, a);
    return total / 2.0;
  }

 private:
  ActionSpec spec_;
  ArsqNetworks nets_;
  LossConfig loss_;
  std::unique_ptr<nn::Adam> optimizer_;
};

LandscapeGrid predicted_grid(LandscapeModel& model, int resolution) {
  LandscapeGrid g;
  g.resolution = resolution;
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const double a[2] = {-1.0 + 2.0 * i / (resolution - 1), -1.0 + 2.0 * j / (resolution - 1)};
      g.a1.push_back(a[0]);
      g.a2.push_back(a[1]);
      g.q.push_back(model.predict(a));
    }
  }
  return g;
}

}  // namespace

LandscapeResult case_study_landscape(const std::filesystem::path& out_dir, const std::vector<std::uint64_t>& seeds,
                                     const LandscapeOptions& options) {
  if (seeds.empty()) throw std::invalid_argument("case_study_landscape: at least one seed is required");
  const ModeLandscape landscape = ModeLandscape::error_analysis();
  OneStepEnv env("landscape", landscape, options.bins, options.levels);
  LandscapeResult out;
  const char* methods[] = {"independent", "arsq_no_cf", "arsq"};
  for (std::uint64_t seed : seeds) {
    const OfflineDataset data = generate_demos(env, PolicyKind::noisy, options.train_samples, seed);
    for (const char* method : methods) {
      LandscapeMethodResult run;
      run.method = method;
      run.seed = seed;
      try {
        std::unique_ptr<LandscapeModel> model;
        const std::string m = method;
        if (m == "independent") model = std::make_unique<IndependentModel>(env.spec().action_spec, options, seed);
        else if (m == "arsq_no_cf") model = std::make_unique<ArsqModel>(env.spec(), ConditioningMode::no_cf, options, seed);
        else model = std::make_unique<ArsqModel>(env.spec(), ConditioningMode::coarse_outer_dim_inner, options, seed);
        SampleRng rng(seed + 11);
        for (int step = 0; step < options.steps; ++step) {
          const auto rows = sample(data, static_cast<std::size_t>(options.batch_size), rng);
          model->train_step(rows);
        }
        run.mae = oracle::q_landscape_error([&](std::span<const double> a) { return model->predict(a); }, landscape,
                                            options.eval_samples, seed + 1'000'003);
        run.grid = predicted_grid(*model, options.grid_resolution);
      } catch (const nn::NumericalError& e) {
        run.diverged = true;
        run.error = e.what();
        run.mae = std::numeric_limits<double>::quiet_NaN();
      }
      out.runs.push_back(std::move(run));
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::vector<oracle::MaeRow> rows;
    for (const auto& r : out.runs) {
      rows.push_back({r.method, r.seed, r.mae});
      if (!r.diverged)
        write_grid_csv(out_dir / ("landscape_grid_" + r.method + "_seed" + std::to_string(r.seed) + ".csv"), r.grid);
    }
    oracle::write_mae_csv(out_dir / "landscape_mae.csv", rows);
    write_grid_csv(out_dir / "landscape_truth.csv", landscape_ground_truth(landscape, options.grid_resolution));
  }
  return out;
}

}  // namespace arsq
