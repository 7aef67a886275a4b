#include "arsq/checkpoint.hpp"
#include "arsq/config.hpp"
#include "arsq/trainer.hpp"

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace arsq;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("arsq_trainer_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ARSQ_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TrainConfig short_config() {
  TrainConfig c;
  c.demo_episodes = 5;
  c.total_env_steps = 250;
  c.eval_every = 100;
  c.eval_episodes = 2;
  c.hidden_widths = {16};
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("config text round trip and comments") {
  TrainConfig c = TrainConfig::parse(
      "# comment\n"
      "env = landscape\n"
      "bins = 5   # per level\n"
      "hidden_widths = 32,16\n"
      "conditioning = no_cf\n"
      "demo_segment = bottom\n"
      "demo_fraction = 0.3\n");
  CHECK(c.env == "landscape");
  CHECK(c.bins == 5);
  CHECK(c.hidden_widths == std::vector<int>{32, 16});
  CHECK(c.conditioning == ConditioningMode::no_cf);
  REQUIRE(c.demo_segment.has_value());
  CHECK(*c.demo_segment == Segment::bottom);
  const TrainConfig back = TrainConfig::parse(c.to_text());
  CHECK(back.to_text() == c.to_text());
}

TEST_CASE("config validation errors") {
  CHECK_THROWS_AS(TrainConfig::parse("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::parse("bins = three\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::parse("bins\n"), ConfigError);
  TrainConfig c;
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.tau = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.bins = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  try {
    TrainConfig::parse("env = toy\n\nlevels = x\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("metrics rows follow the evaluation cadence") {
  const fs::path out = fresh_dir("cadence");
  const TrainResult r = train(short_config(), out);
  const auto lines = lines_of(r.metrics_path);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == kMetricsHeader);
  CHECK(lines[1].rfind("100,", 0) == 0);
  CHECK(lines[2].rfind("200,", 0) == 0);
  CHECK(lines[3].rfind("250,", 0) == 0);
  CHECK(r.rows.back().step == 250);
  CHECK(r.max_normalization_error < 1e-6);
  CHECK(fs::exists(out / "checkpoint.bin"));
  CHECK(fs::exists(out / "config.txt"));
}

TEST_CASE("offline mode counts gradient steps") {
  TrainConfig c = short_config();
  c.total_env_steps = 0;
  c.offline_grad_steps = 120;
  c.eval_every = 50;
  const TrainResult r = train(c, fresh_dir("offline"));
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].step == 50);
  CHECK(r.rows[2].step == 120);
}

TEST_CASE("a checkpoint evaluates to the training-time statistics") {
  const fs::path out = fresh_dir("reeval");
  TrainConfig c = short_config();
  const TrainResult r = train(c, out);
  const EvalStats again = evaluate_checkpoint(r.checkpoint_path, "", 5, 17);
  const EvalStats twice = evaluate_checkpoint(r.checkpoint_path, "point_mass", 5, 17);
  CHECK(again.return_mean == twice.return_mean);
  CHECK(again.episodes == 5);
  CHECK_THROWS_AS(evaluate_checkpoint(r.checkpoint_path, "", 0, 17), ConfigError);
  CHECK_THROWS(evaluate_checkpoint(r.checkpoint_path, "landscape", 5, 17));
}

TEST_CASE("randomly initialized policy rarely reaches the goal") {
  const fs::path out = fresh_dir("random");
  TrainConfig c;
  c.seed = 3;
  {
    std::ofstream cfg(out / "config.txt");
    cfg << c.to_text();
  }
  auto env = make_env(c);
  ArsqNetworks nets = build_networks(c, env->spec());
  auto params = nets.all_parameters();
  std::vector<const Parameter*> cparams(params.begin(), params.end());
  save_checkpoint(out / "checkpoint.bin", cparams);
  const EvalStats s = evaluate_checkpoint(out / "checkpoint.bin", "", 20, 5);
  CHECK(s.success_rate < 0.1);
}

TEST_CASE("behavior cloning on expert demonstrations") {
  TrainConfig c;
  c.demo_policy = "expert";
  c.demo_episodes = 50;
  c.total_env_steps = 0;
  c.use_rl = false;
  c.offline_grad_steps = 5000;
  c.eval_every = 5000;
  c.eval_episodes = 20;
  const TrainResult r = train(c, fresh_dir("bc_expert"));
  CHECK(r.final_eval.success_rate >= 0.9);
}

TEST_CASE("cli exit codes") {
  const fs::path out = fresh_dir("cli");
  {
    std::ofstream bad(out / "bad.cfg");
    bad << "bogus_key = 1\n";
    std::ofstream ok(out / "ok.cfg");
    ok << "demo_episodes = 2\ntotal_env_steps = 60\neval_every = 30\neval_episodes = 1\nhidden_widths = 8\n";
    std::ofstream boom(out / "boom.cfg");
    boom << "demo_episodes = 2\ntotal_env_steps = 200\neval_every = 100\neval_episodes = 1\n"
            "learning_rate = 1e300\nhidden_widths = 8\n";
  }
  CHECK(run_cli("train --config " + (out / "ok.cfg").string() + " --out " + (out / "ok").string()) == 0);
  CHECK(fs::exists(out / "ok" / "metrics.csv"));
  CHECK(run_cli("train --config " + (out / "bad.cfg").string() + " --out " + (out / "bad").string()) == 1);
  CHECK(run_cli("train --env nowhere --out " + (out / "bad2").string()) == 1);
  CHECK(run_cli("eval --checkpoint " + (out / "ok" / "checkpoint.bin").string() + " --episodes 0") == 1);
  CHECK(run_cli("no-such-command") == 1);
  CHECK(run_cli("train --config " + (out / "boom.cfg").string() + " --out " + (out / "boom").string()) == 2);
}
