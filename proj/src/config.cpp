#include "arsq/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace arsq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad number for '" + key + "': '" + value + "'");
  return out;
}

// gcc 11 lacks from_chars for double.
double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw ConfigError("config: bad number for '" + key + "': '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + value + "'");
}

std::vector<int> parse_widths(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw ConfigError("config: '" + key + "' needs at least one width");
  return out;
}

template <typename Fn>
auto wrap(const std::string& key, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "env") env = value;
  else if (key == "bins") bins = parse_number<int>(key, value);
  else if (key == "levels") levels = parse_number<int>(key, value);
  else if (key == "alpha") alpha = parse_real(key, value);
  else if (key == "gamma") gamma = parse_real(key, value);
  else if (key == "tau") tau = parse_real(key, value);
  else if (key == "learning_rate") learning_rate = parse_real(key, value);
  else if (key == "weight_decay") weight_decay = parse_real(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "bc_margin") bc_margin = parse_real(key, value);
  else if (key == "bc_weight") bc_weight = parse_real(key, value);
  else if (key == "bc_variant") bc_variant = parse_bool(key, value);
  else if (key == "use_rl") use_rl = parse_bool(key, value);
  else if (key == "conditioning") conditioning = wrap(key, [&] { return parse_conditioning_mode(value); });
  else if (key == "hidden_widths") hidden_widths = parse_widths(key, value);
  else if (key == "activation") activation = wrap(key, [&] { return nn::parse_activation(value); });
  else if (key == "rollout_net") {
    if (value == "current") rollout_net = RolloutNet::current;
    else if (value == "target") rollout_net = RolloutNet::target;
    else throw ConfigError("config: rollout_net must be current or target, got '" + value + "'");
  }
  else if (key == "grad_steps_per_env_step") grad_steps_per_env_step = parse_number<int>(key, value);
  else if (key == "total_env_steps") total_env_steps = parse_number<std::int64_t>(key, value);
  else if (key == "offline_grad_steps") offline_grad_steps = parse_number<std::int64_t>(key, value);
  else if (key == "eval_every") eval_every = parse_number<std::int64_t>(key, value);
  else if (key == "eval_episodes") eval_episodes = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "offline_data") offline_data = value;
  else if (key == "demo_policy") demo_policy = value;
  else if (key == "demo_episodes") demo_episodes = parse_number<int>(key, value);
  else if (key == "demo_segment") {
    if (value.empty() || value == "none") demo_segment.reset();
    else demo_segment = wrap(key, [&] { return parse_segment(value); });
  }
  else if (key == "demo_fraction") demo_fraction = parse_real(key, value);
  else if (key == "replay_capacity") replay_capacity = parse_number<std::int64_t>(key, value);
  else if (key == "log_wall_time") log_wall_time = parse_bool(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  require(!env.empty(), "env must be set");
  require(bins >= 2, "bins must be >= 2");
  require(levels >= 1, "levels must be >= 1");
  require(alpha > 0.0, "alpha must be positive");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(tau >= 0.0 && tau <= 1.0, "tau must lie in [0, 1]");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(bc_weight >= 0.0, "bc_weight must be >= 0");
  for (int w : hidden_widths) require(w >= 1, "hidden_widths entries must be >= 1");
  require(grad_steps_per_env_step >= 1, "grad_steps_per_env_step must be >= 1");
  require(total_env_steps >= 0, "total_env_steps must be >= 0");
  require(offline_grad_steps >= 1, "offline_grad_steps must be >= 1");
  require(eval_every >= 1, "eval_every must be >= 1");
  require(eval_episodes >= 1, "eval_episodes must be >= 1");
  require(demo_episodes >= 0, "demo_episodes must be >= 0");
  require(demo_fraction > 0.0 && demo_fraction <= 1.0, "demo_fraction must lie in (0, 1]");
  require(replay_capacity >= 1, "replay_capacity must be >= 1");
  require(total_env_steps > 0 || !offline_data.empty() || demo_episodes > 0,
          "offline training (total_env_steps = 0) needs offline_data or demo_episodes");
  require(use_rl || !offline_data.empty() || demo_episodes > 0, "use_rl = false needs demonstrations");
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  std::string widths;
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) widths += (i ? "," : "") + std::to_string(hidden_widths[i]);
  out << "env = " << env << '\n'
      << "bins = " << bins << '\n'
      << "levels = " << levels << '\n'
      << "alpha = " << alpha << '\n'
      << "gamma = " << gamma << '\n'
      << "tau = " << tau << '\n'
      << "learning_rate = " << learning_rate << '\n'
      << "weight_decay = " << weight_decay << '\n'
      << "batch_size = " << batch_size << '\n'
      << "bc_margin = " << bc_margin << '\n'
      << "bc_weight = " << bc_weight << '\n'
      << "bc_variant = " << (bc_variant ? "true" : "false") << '\n'
      << "use_rl = " << (use_rl ? "true" : "false") << '\n'
      << "conditioning = " << to_string(conditioning) << '\n'
      << "hidden_widths = " << widths << '\n'
      << "activation = " << nn::to_string(activation) << '\n'
      << "rollout_net = " << (rollout_net == RolloutNet::current ? "current" : "target") << '\n'
      << "grad_steps_per_env_step = " << grad_steps_per_env_step << '\n'
      << "total_env_steps = " << total_env_steps << '\n'
      << "offline_grad_steps = " << offline_grad_steps << '\n'
      << "eval_every = " << eval_every << '\n'
      << "eval_episodes = " << eval_episodes << '\n'
      << "seed = " << seed << '\n'
      << "offline_data = " << offline_data << '\n'
      << "demo_policy = " << demo_policy << '\n'
      << "demo_episodes = " << demo_episodes << '\n'
      << "demo_segment = " << (demo_segment ? to_string(*demo_segment) : "none") << '\n'
      << "demo_fraction = " << demo_fraction << '\n'
      << "replay_capacity = " << replay_capacity << '\n'
      << "log_wall_time = " << (log_wall_time ? "true" : "false") << '\n';
  return out.str();
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace arsq
