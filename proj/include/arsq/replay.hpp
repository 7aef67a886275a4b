#pragma once

#include "arsq/action_codec.hpp"
#include "arsq/losses.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace arsq {

struct Transition {
  std::vector<double> obs;
  std::vector<double> action_continuous;
  DiscreteAction action_discrete;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
  std::int64_t episode_id = 0;
  bool is_demo = false;
};

struct EpisodeRange {
  std::int64_t episode_id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

class OfflineDataset {
 public:
  OfflineDataset() = default;
  explicit OfflineDataset(std::vector<Transition> transitions);

  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<EpisodeRange>& episodes() const { return episodes_; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  double episode_return(std::size_t episode) const;
  // Number of input lines whose action had to be clamped into bounds.
  std::size_t clamped_actions = 0;

 private:
  std::vector<Transition> transitions_;
  std::vector<EpisodeRange> episodes_;
};

// JSON-lines transition files. Keys: obs, action, reward, next_obs, done,
// episode. Actions are discretized through the codec at load time.
OfflineDataset load_dataset(const std::filesystem::path& path, const ActionSpec& spec, int obs_width);
void write_dataset(const std::filesystem::path& path, const OfflineDataset& dataset);
std::string transition_to_json(const Transition& t);

enum class Segment { top, middle, bottom };
Segment parse_segment(const std::string& s);
std::string to_string(Segment s);

// Episodes ranked by return (descending); keeps floor(fraction * N) of them
// from the requested end, or centered on the median rank for `middle`.
OfflineDataset rank_filter(const OfflineDataset& dataset, Segment segment, double fraction);
// Episode positions (into dataset.episodes()) selected by rank_filter.
std::vector<std::size_t> rank_select(std::span<const double> returns, Segment segment, double fraction);

using SampleRng = std::mt19937_64;

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000);

  // When full, the oldest non-demo entry is overwritten. Demo entries are
  // evicted only when nothing else is left.
  void push(Transition t);
  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }
  const Transition& at(std::size_t i) const { return storage_[i]; }
  std::size_t demo_count() const { return demo_order_.size(); }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::deque<std::size_t> online_order_;  // slots holding non-demo data, oldest first
  std::deque<std::size_t> demo_order_;
};

// Uniform with replacement.
std::vector<const Transition*> sample(const OfflineDataset& source, std::size_t batch_size, SampleRng& rng);
std::vector<const Transition*> sample(const ReplayBuffer& source, std::size_t batch_size, SampleRng& rng);
std::vector<const Transition*> sample(std::span<const Transition> source, std::size_t batch_size, SampleRng& rng);

Batch make_batch(std::span<const Transition* const> rows);

}  // namespace arsq
