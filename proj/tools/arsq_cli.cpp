// Command-line entry point: training, evaluation, demo generation and the
// two synthetic case studies.

#include "arsq/case_studies.hpp"
#include "arsq/trainer.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitDiverged = 2;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

arsq::TrainConfig base_config(const GlobalFlags& g) {
  arsq::TrainConfig cfg = g.config.empty() ? arsq::TrainConfig{} : arsq::TrainConfig::load(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

std::string out_dir(const GlobalFlags& g, const std::string& fallback) { return g.out.empty() ? fallback : g.out; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-regressive soft Q-learning on desk-scale tasks"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config, "key = value config file");
  app.add_option("--seed", g.seed, "random seed (overrides the config)");
  app.add_option("--out", g.out, "output directory");

  auto* train = app.add_subcommand("train", "run the training loop, write metrics.csv and checkpoint.bin");
  std::string offline_data, env_name;
  std::optional<std::int64_t> steps;
  train->add_option("--offline-data", offline_data, "JSON-lines demonstration file");
  train->add_option("--env", env_name, "toy | landscape | point_mass | point_mass_sparse");
  train->add_option("--steps", steps, "environment steps (0 trains offline)");

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  std::string checkpoint;
  int episodes = 10;
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin written by train")->required();
  eval->add_option("--episodes", episodes, "number of greedy episodes");
  eval->add_option("--env", env_name, "environment override");

  auto* toy = app.add_subcommand("case-study-toy", "tabular mode-mix comparison on a 2 x 2 lattice");

  auto* landscape = app.add_subcommand("case-study-landscape", "Q-landscape error of three decompositions");
  std::vector<std::uint64_t> seeds;
  landscape->add_option("--seeds", seeds, "seeds (default 0 1 2, or --seed)");
  arsq::LandscapeOptions landscape_opts;
  landscape->add_option("--train-steps", landscape_opts.steps, "gradient steps per method");
  landscape->add_option("--alpha", landscape_opts.alpha, "temperature of the ARSQ variants");
  landscape->add_option("--learning-rate", landscape_opts.learning_rate, "Adam learning rate");
  landscape->add_option("--batch-size", landscape_opts.batch_size, "mini-batch rows");

  auto* gen = app.add_subcommand("gen-demos", "write demonstrations as JSON lines");
  std::string policy = "medium";
  int demo_episodes = 50;
  gen->add_option("--env", env_name, "environment");
  gen->add_option("--policy", policy, "expert | medium | noisy | mode_mix");
  gen->add_option("--episodes", demo_episodes, "number of episodes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (train->parsed()) {
      arsq::TrainConfig cfg = base_config(g);
      if (!offline_data.empty()) cfg.offline_data = offline_data;
      if (!env_name.empty()) cfg.env = env_name;
      if (steps) cfg.total_env_steps = *steps;
      const arsq::TrainResult r = arsq::train(cfg, out_dir(g, "runs/train"));
      std::printf("final: return %.4f +- %.4f, success %.3f\nmetrics: %s\ncheckpoint: %s\n", r.final_eval.return_mean,
                  r.final_eval.return_std, r.final_eval.success_rate, r.metrics_path.string().c_str(),
                  r.checkpoint_path.string().c_str());
    } else if (eval->parsed()) {
      const arsq::EvalStats s = arsq::evaluate_checkpoint(checkpoint, env_name, episodes, g.seed.value_or(0));
      std::printf("episodes %d: return %.4f +- %.4f, success %.3f\n", s.episodes, s.return_mean, s.return_std,
                  s.success_rate);
    } else if (toy->parsed()) {
      const arsq::ToyResult r = arsq::case_study_toy(out_dir(g, "runs/toy"), g.seed.value_or(0));
      for (const arsq::ToyVerdict* v : {&r.arsq, &r.independent})
        std::printf("%-12s argmax cell (%d, %d), optimal cell (%d, %d): %s\n", v->method.c_str(), v->argmax_cell[0],
                    v->argmax_cell[1], v->optimal_cell[0], v->optimal_cell[1], v->optimal() ? "optimal" : "not optimal");
    } else if (landscape->parsed()) {
      if (seeds.empty()) seeds = g.seed ? std::vector<std::uint64_t>{*g.seed} : std::vector<std::uint64_t>{0, 1, 2};
      const arsq::LandscapeResult r = arsq::case_study_landscape(out_dir(g, "runs/landscape"), seeds, landscape_opts);
      for (const auto& run : r.runs)
        std::printf("%-12s seed %llu: mae %.5f%s\n", run.method.c_str(), static_cast<unsigned long long>(run.seed),
                    run.mae, run.diverged ? " (diverged)" : "");
      for (const char* m : {"independent", "arsq_no_cf", "arsq"}) std::printf("mean %-12s %.5f\n", m, r.mean_mae(m));
    } else if (gen->parsed()) {
      arsq::TrainConfig cfg = base_config(g);
      if (!env_name.empty()) cfg.env = env_name;
      std::unique_ptr<arsq::Env> env = arsq::make_env(cfg);
      const arsq::OfflineDataset data =
          arsq::generate_demos(*env, arsq::parse_policy_kind(policy), demo_episodes, cfg.seed);
      const std::filesystem::path dir = out_dir(g, "runs/demos");
      std::filesystem::create_directories(dir);
      const std::filesystem::path file = dir / (cfg.env + "_" + policy + ".jsonl");
      arsq::write_dataset(file, data);
      std::printf("%zu transitions in %zu episodes: %s\n", data.size(), data.episodes().size(), file.string().c_str());
    }
  } catch (const arsq::nn::NumericalError& e) {
    std::cerr << "numerical divergence: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}
