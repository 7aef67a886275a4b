#include "arsq/trainer.hpp"

#include "arsq/checkpoint.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace arsq {

std::string format_metrics_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                static_cast<long long>(r.step), r.episode_return_mean, r.episode_return_std, r.success_rate,
                r.rl_loss, r.bc_loss, r.v_mean, r.policy_entropy_mean, r.wall_ms);
  return buf;
}

std::unique_ptr<Env> make_env(const TrainConfig& config) {
  try {
    return make_env(config.env, config.bins, config.levels);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ArsqNetworks build_networks(const TrainConfig& config, const EnvSpec& env_spec) {
  nn::Rng rng(config.seed);
  AdvantageNetworkConfig ac;
  ac.obs_width = env_spec.obs_width;
  ac.action_spec = env_spec.action_spec;
  ac.mode = config.conditioning;
  ac.hidden_widths = config.hidden_widths;
  ac.activation = config.activation;
  ac.alpha = config.alpha;
  nn::DenseNetworkConfig vc;
  vc.input_width = env_spec.obs_width;
  vc.hidden_widths = config.hidden_widths;
  vc.output_width = 1;
  vc.activation = config.activation;

  ArsqNetworks nets;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string id = std::to_string(i + 1);
    nets.adv[i] = AdvantageNetwork("adv" + id, ac, rng);
    nets.adv_target[i] = AdvantageNetwork("target/adv" + id, ac, rng);
  }
  nets.values = ValueNetworkPair(vc, rng);
  nets.update_targets(0.0);
  return nets;
}

EvalStats evaluate_policy(ArsqNetworks& nets, Env& env, int n_episodes, std::uint64_t seed, double alpha,
                          SelectionMode mode) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  std::mt19937_64 seeds(seed);
  nn::Rng pick(seed ^ 0x5bd1e995u);
  const ActionSpec& spec = env.spec().action_spec;
  EvalStats out;
  out.episodes = n_episodes;
  std::vector<double> returns;
  double entropy_sum = 0.0;
  std::int64_t steps = 0;
  int successes = 0;
  for (int e = 0; e < n_episodes; ++e) {
    std::vector<double> obs = env.reset(seeds());
    double ret = 0.0;
    bool success = false;
    for (;;) {
      const ActionSelection sel = select_action(nets.adv[0], nets.adv[1], obs, alpha, mode, pick);
      entropy_sum += sel.entropy;
      ++steps;
      StepResult r = env.step(decode(spec, sel.action));
      ret += r.reward;
      success = success || r.success;
      obs = std::move(r.obs);
      if (r.done || r.truncated) break;
    }
    returns.push_back(ret);
    successes += success ? 1 : 0;
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= n_episodes;
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  out.return_mean = mean;
  out.return_std = std::sqrt(var / n_episodes);
  out.success_rate = static_cast<double>(successes) / n_episodes;
  out.entropy_mean = entropy_sum / static_cast<double>(steps);
  return out;
}

EvalStats evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::string& env_name, int n_episodes,
                              std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("eval: n_episodes must be >= 1");
  const std::filesystem::path cfg_path = checkpoint.parent_path() / "config.txt";
  TrainConfig config = TrainConfig::load(cfg_path);
  std::unique_ptr<Env> trained_env = make_env(config);
  std::unique_ptr<Env> env;
  if (env_name.empty() || env_name == config.env) {
    env = std::move(trained_env);
  } else {
    TrainConfig other = config;
    other.env = env_name;
    env = make_env(other);
    if (env->spec().obs_width != trained_env->spec().obs_width ||
        !(env->spec().action_spec == trained_env->spec().action_spec))
      throw ConfigError("eval: environment '" + env_name + "' does not match the checkpoint's '" + config.env + "'");
  }
  ArsqNetworks nets = build_networks(config, env->spec());
  const auto params = nets.all_parameters();
  load_checkpoint(checkpoint, params);
  return evaluate_policy(nets, *env, n_episodes, seed, config.alpha, SelectionMode::greedy);
}

OfflineDataset prepare_demos(const TrainConfig& config, const EnvSpec& env_spec) {
  OfflineDataset data;
  if (!config.offline_data.empty()) {
    data = load_dataset(config.offline_data, env_spec.action_spec, env_spec.obs_width);
  } else if (config.demo_episodes > 0) {
    std::unique_ptr<Env> env = make_env(config);
    PolicyKind kind;
    try {
      kind = parse_policy_kind(config.demo_policy);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    data = generate_demos(*env, kind, config.demo_episodes, config.seed + 0x2545F4914F6CDD1Dull);
  }
  if (config.demo_segment && !data.empty()) data = rank_filter(data, *config.demo_segment, config.demo_fraction);
  return data;
}

double normalization_error(AdvantageNetwork& net, const Batch& batch) {
  double worst = 0.0;
  for (std::size_t f = 0; f < net.layout().size(); ++f) {
    Graph g;
    const Matrix a = net.head_advantages(g, batch.obs, batch.actions, f).value();
    const ad::Vector z = (a.array() / net.alpha()).exp().rowwise().sum();
    worst = std::max(worst, (z.array() - 1.0).abs().maxCoeff());
  }
  return worst;
}

namespace {

struct Running {
  double rl = 0.0, bc = 0.0, v = 0.0;
  std::int64_t n = 0;
  void add(const LossBreakdown& l) {
    rl += l.rl;
    bc += l.bc;
    v += l.v_mean;
    ++n;
  }
  void reset() { *this = Running{}; }
};

class Trainer {
 public:
  Trainer(const TrainConfig& config, const std::filesystem::path& out_dir)
      : config_(config), out_dir_(out_dir), env_(make_env(config)), eval_env_(make_env(config)),
        nets_(build_networks(config, env_->spec())),
        optimizer_(nets_.online_parameters(),
                   nn::AdamOptions{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay}),
        replay_(static_cast<std::size_t>(config.replay_capacity)), sample_rng_(config.seed + 1),
        act_rng_(config.seed + 2), env_seeds_(config.seed + 3) {
    loss_config_.gamma = config.gamma;
    loss_config_.alpha = config.alpha;
    loss_config_.bc_margin = config.bc_margin;
    loss_config_.bc_weight = config.bc_weight;
    loss_config_.bc_variant = config.bc_variant;
    loss_config_.use_rl = config.use_rl;
    demos_ = prepare_demos(config, env_->spec());
    demo_pool_ = demos_.transitions();
    for (const Transition& t : demo_pool_) replay_.push(t);
    start_ = std::chrono::steady_clock::now();
  }

  TrainResult run() {
    std::filesystem::create_directories(out_dir_);
    {
      std::ofstream cfg(out_dir_ / "config.txt", std::ios::trunc);
      cfg << config_.to_text();
    }
    result_.metrics_path = out_dir_ / "metrics.csv";
    metrics_.open(result_.metrics_path, std::ios::trunc);
    if (!metrics_) throw std::runtime_error("cannot open " + result_.metrics_path.string());
    metrics_ << kMetricsHeader << '\n';

    if (config_.total_env_steps == 0) run_offline();
    else run_online();

    result_.checkpoint_path = out_dir_ / "checkpoint.bin";
    auto params = nets_.all_parameters();
    std::vector<const Parameter*> cparams(params.begin(), params.end());
    save_checkpoint(result_.checkpoint_path, cparams);
    return result_;
  }

 private:
  void run_offline() {
    if (demo_pool_.empty()) throw ConfigError("offline training needs a non-empty demonstration dataset");
    for (std::int64_t step = 1; step <= config_.offline_grad_steps; ++step) {
      gradient_step(false, step);
      if (step % config_.eval_every == 0 || step == config_.offline_grad_steps) log_row(step);
    }
  }

  void run_online() {
    std::vector<double> obs = env_->reset(env_seeds_());
    std::vector<Transition> episode;
    const ActionSpec& spec = env_->spec().action_spec;
    const bool sparse = env_->spec().reward_kind == RewardKind::sparse;
    for (std::int64_t step = 1; step <= config_.total_env_steps; ++step) {
      auto& rollout = config_.rollout_net == RolloutNet::current ? nets_.adv : nets_.adv_target;
      const ActionSelection sel =
          select_action(rollout[0], rollout[1], obs, config_.alpha, SelectionMode::sample, act_rng_);
      Transition t;
      t.obs = obs;
      t.action_discrete = sel.action;
      t.action_continuous = decode(spec, sel.action);
      StepResult r = env_->step(t.action_continuous);
      t.reward = r.reward;
      t.next_obs = r.obs;
      t.done = r.done;
      t.episode_id = episode_count_;
      replay_.push(t);
      if (sparse) episode.push_back(t);
      obs = std::move(r.obs);
      if (r.done || r.truncated) {
        // Successful online episodes join the demonstration pool.
        if (sparse && r.success) {
          for (Transition& e : episode) {
            e.is_demo = true;
            demo_pool_.push_back(std::move(e));
          }
        }
        episode.clear();
        ++episode_count_;
        obs = env_->reset(env_seeds_());
      }
      for (int k = 0; k < config_.grad_steps_per_env_step; ++k) gradient_step(true, step);
      if (step % config_.eval_every == 0 || step == config_.total_env_steps) log_row(step);
    }
  }

  void gradient_step(bool with_replay, std::int64_t step) {
    const auto bs = static_cast<std::size_t>(config_.batch_size);
    Batch demo, replay;
    if (!demo_pool_.empty()) {
      const auto rows = sample(std::span<const Transition>(demo_pool_), bs, sample_rng_);
      demo = make_batch(rows);
    }
    if (with_replay && config_.use_rl) {
      const auto rows = sample(replay_, bs, sample_rng_);
      replay = make_batch(rows);
    }
    if (demo.empty() && replay.empty()) return;
    Graph g;
    const LossBreakdown loss = combined_loss(g, demo, replay, nets_, loss_config_);
    const double total = loss.total.scalar();
    if (!std::isfinite(total)) {
      std::ostringstream msg;
      msg << "loss became non-finite at step " << step << " (rl " << loss.rl << ", bc " << loss.bc << ", v_mean "
          << loss.v_mean << ")";
      throw nn::NumericalError(msg.str());
    }
    optimizer_.zero_grad();
    g.backward(loss.total);
    optimizer_.step();
    nets_.update_targets(1.0 - config_.tau);
    running_.add(loss);
    last_batch_ = demo.empty() ? std::move(replay) : std::move(demo);
  }

  void log_row(std::int64_t step) {
    const EvalStats ev =
        evaluate_policy(nets_, *eval_env_, config_.eval_episodes, config_.seed + 0x9E3779B97F4A7C15ull, config_.alpha);
    MetricsRow row;
    row.step = step;
    row.episode_return_mean = ev.return_mean;
    row.episode_return_std = ev.return_std;
    row.success_rate = ev.success_rate;
    if (running_.n > 0) {
      row.rl_loss = running_.rl / static_cast<double>(running_.n);
      row.bc_loss = running_.bc / static_cast<double>(running_.n);
      row.v_mean = running_.v / static_cast<double>(running_.n);
    }
    row.policy_entropy_mean = ev.entropy_mean;
    if (config_.log_wall_time)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    if (!last_batch_.empty())
      for (auto& net : nets_.adv)
        result_.max_normalization_error = std::max(result_.max_normalization_error, normalization_error(net, last_batch_));
    metrics_ << format_metrics_row(row) << '\n';
    metrics_.flush();
    result_.rows.push_back(row);
    result_.final_eval = ev;
    running_.reset();
  }

  TrainConfig config_;
  std::filesystem::path out_dir_;
  std::unique_ptr<Env> env_;
  std::unique_ptr<Env> eval_env_;
  ArsqNetworks nets_;
  nn::Adam optimizer_;
  LossConfig loss_config_;
  OfflineDataset demos_;
  std::vector<Transition> demo_pool_;
  ReplayBuffer replay_;
  SampleRng sample_rng_;
  nn::Rng act_rng_;
  std::mt19937_64 env_seeds_;
  std::int64_t episode_count_ = 0;
  Running running_;
  Batch last_batch_;
  std::ofstream metrics_;
  TrainResult result_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

TrainResult train(const TrainConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  Trainer trainer(config, out_dir);
  return trainer.run();
}

}  // namespace arsq
