#include "arsq/replay.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace arsq {

using ordered_json = nlohmann::ordered_json;

OfflineDataset::OfflineDataset(std::vector<Transition> transitions) : transitions_(std::move(transitions)) {
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < transitions_.size(); ++i) {
    const std::int64_t id = transitions_[i].episode_id;
    if (episodes_.empty() || episodes_.back().episode_id != id) {
      if (!seen.insert(id).second)
        throw std::invalid_argument("episode " + std::to_string(id) + " is not contiguous in the dataset");
      episodes_.push_back({id, i, i});
    }
    episodes_.back().end = i + 1;
  }
}

double OfflineDataset::episode_return(std::size_t episode) const {
  const EpisodeRange& r = episodes_.at(episode);
  double total = 0.0;
  for (std::size_t i = r.begin; i < r.end; ++i) total += transitions_[i].reward;
  return total;
}

namespace {

std::vector<double> number_array(const ordered_json& j, const char* key, std::size_t line) {
  if (!j.is_array()) throw std::runtime_error("line " + std::to_string(line) + ": '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number())
      throw std::runtime_error("line " + std::to_string(line) + ": '" + key + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

OfflineDataset load_dataset(const std::filesystem::path& path, const ActionSpec& spec, int obs_width) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  static const char* const kKeys[] = {"obs", "action", "reward", "next_obs", "done", "episode"};
  std::vector<Transition> rows;
  std::size_t clamped = 0;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || j.size() < 6)
      throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": expected an object with 6 keys");
    auto it = j.begin();
    for (const char* key : kKeys) {
      if (it == j.end() || it.key() != key)
        throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": expected key '" + key + "'");
      ++it;
    }
    Transition t;
    t.obs = number_array(j["obs"], "obs", line);
    t.action_continuous = number_array(j["action"], "action", line);
    t.next_obs = number_array(j["next_obs"], "next_obs", line);
    if (!j["reward"].is_number() || !j["done"].is_boolean() || !j["episode"].is_number_integer())
      throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": wrong value types");
    t.reward = j["reward"].get<double>();
    t.done = j["done"].get<bool>();
    t.episode_id = j["episode"].get<std::int64_t>();
    if (t.obs.size() != static_cast<std::size_t>(obs_width) || t.next_obs.size() != static_cast<std::size_t>(obs_width))
      throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": observation width mismatch");
    if (t.action_continuous.size() != static_cast<std::size_t>(spec.dims))
      throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": action width mismatch");
    bool out_of_bounds = false;
    for (int d = 0; d < spec.dims; ++d) {
      const double a = t.action_continuous[static_cast<std::size_t>(d)];
      if (!std::isfinite(a))
        throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": non-finite action");
      if (a < spec.low[static_cast<std::size_t>(d)] || a > spec.high[static_cast<std::size_t>(d)]) out_of_bounds = true;
    }
    if (out_of_bounds) ++clamped;
    t.action_discrete = encode(spec, t.action_continuous);
    t.is_demo = true;
    rows.push_back(std::move(t));
  }
  OfflineDataset ds(std::move(rows));
  ds.clamped_actions = clamped;
  return ds;
}

std::string transition_to_json(const Transition& t) {
  ordered_json j;
  j["obs"] = t.obs;
  j["action"] = t.action_continuous;
  j["reward"] = t.reward;
  j["next_obs"] = t.next_obs;
  j["done"] = t.done;
  j["episode"] = t.episode_id;
  return j.dump();
}

void write_dataset(const std::filesystem::path& path, const OfflineDataset& dataset) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const Transition& t : dataset.transitions()) out << transition_to_json(t) << '\n';
}

Segment parse_segment(const std::string& s) {
  if (s == "top") return Segment::top;
  if (s == "middle") return Segment::middle;
  if (s == "bottom") return Segment::bottom;
  throw std::invalid_argument("unknown segment '" + s + "'");
}

std::string to_string(Segment s) {
  switch (s) {
    case Segment::top: return "top";
    case Segment::middle: return "middle";
    case Segment::bottom: return "bottom";
  }
  return "?";
}

std::vector<std::size_t> rank_select(std::span<const double> returns, Segment segment, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("rank_filter: fraction must lie in (0, 1]");
  const std::size_t n = returns.size();
  if (n == 0) throw std::invalid_argument("rank_filter: dataset has no episodes");
  // Floor keeps the three thirds disjoint; the epsilon absorbs products like 0.3 * 10.
  const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  if (keep == 0) throw std::invalid_argument("rank_filter: fraction selects zero episodes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return returns[a] > returns[b]; });
  std::size_t start = 0;
  switch (segment) {
    case Segment::top: start = 0; break;
    case Segment::bottom: start = n - keep; break;
    case Segment::middle: start = (n - keep) / 2; break;
  }
  std::vector<std::size_t> picked(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(start + keep));
  std::sort(picked.begin(), picked.end());
  return picked;
}

OfflineDataset rank_filter(const OfflineDataset& dataset, Segment segment, double fraction) {
  std::vector<double> returns;
  for (std::size_t e = 0; e < dataset.episodes().size(); ++e) returns.push_back(dataset.episode_return(e));
  std::vector<Transition> rows;
  for (std::size_t e : rank_select(returns, segment, fraction)) {
    const EpisodeRange& r = dataset.episodes()[e];
    for (std::size_t i = r.begin; i < r.end; ++i) rows.push_back(dataset.transitions()[i]);
  }
  return OfflineDataset(std::move(rows));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  std::size_t slot;
  if (storage_.size() < capacity_) {
    slot = storage_.size();
    storage_.push_back(std::move(t));
  } else {
    std::deque<std::size_t>& victims = online_order_.empty() ? demo_order_ : online_order_;
    slot = victims.front();
    victims.pop_front();
    storage_[slot] = std::move(t);
  }
  (storage_[slot].is_demo ? demo_order_ : online_order_).push_back(slot);
}

std::vector<const Transition*> sample(std::span<const Transition> source, std::size_t batch_size, SampleRng& rng) {
  if (source.empty()) throw std::invalid_argument("sample: source is empty");
  std::uniform_int_distribution<std::size_t> pick(0, source.size() - 1);
  std::vector<const Transition*> out(batch_size);
  for (auto& p : out) p = &source[pick(rng)];
  return out;
}

std::vector<const Transition*> sample(const OfflineDataset& source, std::size_t batch_size, SampleRng& rng) {
  return sample(std::span<const Transition>(source.transitions()), batch_size, rng);
}

std::vector<const Transition*> sample(const ReplayBuffer& source, std::size_t batch_size, SampleRng& rng) {
  if (source.empty()) throw std::invalid_argument("sample: replay buffer is empty");
  std::uniform_int_distribution<std::size_t> pick(0, source.size() - 1);
  std::vector<const Transition*> out(batch_size);
  for (auto& p : out) p = &source.at(pick(rng));
  return out;
}

Batch make_batch(std::span<const Transition* const> rows) {
  Batch b;
  if (rows.empty()) return b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto w = static_cast<Eigen::Index>(rows.front()->obs.size());
  b.obs.resize(n, w);
  b.next_obs.resize(n, w);
  b.reward.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(t.obs.size()) != w || static_cast<Eigen::Index>(t.next_obs.size()) != w)
      throw std::invalid_argument("make_batch: inconsistent observation widths");
    for (Eigen::Index j = 0; j < w; ++j) {
      b.obs(i, j) = t.obs[static_cast<std::size_t>(j)];
      b.next_obs(i, j) = t.next_obs[static_cast<std::size_t>(j)];
    }
    b.reward(i) = t.reward;
    b.actions.push_back(t.action_discrete);
    b.done.push_back(t.done);
  }
  return b;
}

}  // namespace arsq
