#include "arsq/action_codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace arsq {

namespace {

std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

ActionSpec ActionSpec::uniform(int dims, double low, double high, int bins_per_level, int levels) {
  ActionSpec spec;
  spec.dims = dims;
  spec.low.assign(static_cast<std::size_t>(std::max(dims, 0)), low);
  spec.high.assign(static_cast<std::size_t>(std::max(dims, 0)), high);
  spec.bins_per_level = bins_per_level;
  spec.levels = levels;
  spec.validate();
  return spec;
}

std::int64_t ActionSpec::fine_bins() const { return ipow(bins_per_level, levels); }

double ActionSpec::fine_width(int dim) const {
  const auto d = static_cast<std::size_t>(dim);
  return (high[d] - low[d]) / static_cast<double>(fine_bins());
}

void ActionSpec::validate() const {
  if (dims < 1) throw std::invalid_argument("action spec: dims must be positive");
  if (low.size() != static_cast<std::size_t>(dims) || high.size() != static_cast<std::size_t>(dims))
    throw std::invalid_argument("action spec: bounds must have one entry per dimension");
  for (int d = 0; d < dims; ++d) {
    const auto i = static_cast<std::size_t>(d);
    if (!(low[i] < high[i]) || !std::isfinite(low[i]) || !std::isfinite(high[i]))
      throw std::invalid_argument("action spec: low < high violated in dimension " + std::to_string(d));
  }
  if (bins_per_level < 2) throw std::invalid_argument("action spec: bins_per_level must be >= 2");
  if (levels < 1) throw std::invalid_argument("action spec: levels must be >= 1");
  if (static_cast<double>(levels) * std::log2(static_cast<double>(bins_per_level)) > 40.0)
    throw std::invalid_argument("action spec: too many fine bins");
}

bool operator==(const ActionSpec& a, const ActionSpec& b) {
  return a.dims == b.dims && a.low == b.low && a.high == b.high &&
         a.bins_per_level == b.bins_per_level && a.levels == b.levels;
}

DiscreteAction::DiscreteAction(int dims, int levels)
    : dims_(dims), levels_(levels), indices_(static_cast<std::size_t>(dims * levels), 0) {}

DiscreteAction::DiscreteAction(int dims, int levels, std::vector<int> indices)
    : dims_(dims), levels_(levels), indices_(std::move(indices)) {
  if (indices_.size() != static_cast<std::size_t>(dims * levels))
    throw std::invalid_argument("discrete action: index count does not match dims x levels");
}

std::int64_t DiscreteAction::global(int dim, int bins_per_level) const {
  std::int64_t g = 0;
  for (int l = 0; l < levels_; ++l) g = g * bins_per_level + at(dim, l);
  return g;
}

double clamp_to_range(const ActionSpec& spec, int dim, double value) {
  const auto d = static_cast<std::size_t>(dim);
  if (std::isnan(value)) throw std::invalid_argument("action value is NaN");
  return std::clamp(value, spec.low[d], spec.high[d]);
}

double bin_center(const ActionSpec& spec, int dim, std::int64_t global_index) {
  return spec.low[static_cast<std::size_t>(dim)] +
         (static_cast<double>(global_index) + 0.5) * spec.fine_width(dim);
}

std::int64_t encode_dim(const ActionSpec& spec, int dim, double value) {
  const double x = clamp_to_range(spec, dim, value);
  const std::int64_t n = spec.fine_bins();
  const double t = (x - spec.low[static_cast<std::size_t>(dim)]) / spec.fine_width(dim);
  const auto guess = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(t)), 0, n - 1);
  // The floor guess can be off by one near bin edges; settle on the nearest
  // center by distance, preferring the lower index on ties.
  std::int64_t best = guess;
  double best_dist = std::abs(x - bin_center(spec, dim, guess));
  for (std::int64_t k = std::max<std::int64_t>(0, guess - 1); k <= std::min(n - 1, guess + 1); ++k) {
    const double dist = std::abs(x - bin_center(spec, dim, k));
    if (dist < best_dist || (dist == best_dist && k < best)) {
      best = k;
      best_dist = dist;
    }
  }
  return best;
}

DiscreteAction encode(const ActionSpec& spec, std::span<const double> action) {
  if (action.size() != static_cast<std::size_t>(spec.dims))
    throw std::invalid_argument("encode: action has " + std::to_string(action.size()) +
                                " dims, spec expects " + std::to_string(spec.dims));
  DiscreteAction out(spec.dims, spec.levels);
  for (int d = 0; d < spec.dims; ++d) {
    const auto digits = level_decompose(spec, encode_dim(spec, d, action[static_cast<std::size_t>(d)]));
    for (int l = 0; l < spec.levels; ++l) out.at(d, l) = digits[static_cast<std::size_t>(l)];
  }
  return out;
}

void check_action(const ActionSpec& spec, const DiscreteAction& action) {
  if (action.dims() != spec.dims || action.levels() != spec.levels)
    throw std::invalid_argument("discrete action shape does not match the action spec");
  for (int v : action.indices())
    if (v < 0 || v >= spec.bins_per_level)
      throw std::out_of_range("discrete action index " + std::to_string(v) + " outside [0, " +
                              std::to_string(spec.bins_per_level) + ")");
}

ContinuousAction decode(const ActionSpec& spec, const DiscreteAction& action) {
  check_action(spec, action);
  ContinuousAction out(static_cast<std::size_t>(spec.dims));
  for (int d = 0; d < spec.dims; ++d)
    out[static_cast<std::size_t>(d)] = bin_center(spec, d, action.global(d, spec.bins_per_level));
  return out;
}

std::vector<int> level_decompose(const ActionSpec& spec, std::int64_t global_index) {
  const std::int64_t n = spec.fine_bins();
  if (global_index < 0 || global_index >= n)
    throw std::out_of_range("level_decompose: global index " + std::to_string(global_index) +
                            " outside [0, " + std::to_string(n) + ")");
  std::vector<int> digits(static_cast<std::size_t>(spec.levels));
  std::int64_t rest = global_index;
  for (int l = 0; l < spec.levels; ++l) {
    const std::int64_t place = ipow(spec.bins_per_level, spec.levels - 1 - l);
    digits[static_cast<std::size_t>(l)] = static_cast<int>(rest / place);
    rest -= digits[static_cast<std::size_t>(l)] * place;
  }
  return digits;
}

std::int64_t level_recompose(const ActionSpec& spec, std::span<const int> digits) {
  if (digits.size() != static_cast<std::size_t>(spec.levels))
    throw std::invalid_argument("level_recompose: wrong digit count");
  std::int64_t g = 0;
  for (int v : digits) {
    if (v < 0 || v >= spec.bins_per_level) throw std::out_of_range("level_recompose: digit out of range");
    g = g * spec.bins_per_level + v;
  }
  return g;
}

DiscreteAction from_global(const ActionSpec& spec, std::span<const std::int64_t> globals) {
  if (globals.size() != static_cast<std::size_t>(spec.dims))
    throw std::invalid_argument("from_global: wrong dimension count");
  DiscreteAction out(spec.dims, spec.levels);
  for (int d = 0; d < spec.dims; ++d) {
    const auto digits = level_decompose(spec, globals[static_cast<std::size_t>(d)]);
    for (int l = 0; l < spec.levels; ++l) out.at(d, l) = digits[static_cast<std::size_t>(l)];
  }
  return out;
}

}  // namespace arsq
