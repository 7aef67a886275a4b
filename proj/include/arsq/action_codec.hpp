#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace arsq {

// Coarse-to-fine discretization lattice. Each dimension is split into
// bins_per_level^levels uniform fine bins; a fine index is written as
// `levels` base-B digits, most significant (coarsest) first.
struct ActionSpec {
  int dims = 1;
  std::vector<double> low;
  std::vector<double> high;
  int bins_per_level = 2;
  int levels = 1;

  static ActionSpec uniform(int dims, double low, double high, int bins_per_level, int levels);

  std::int64_t fine_bins() const;
  double fine_width(int dim) const;
  // Throws std::invalid_argument when the lattice is malformed.
  void validate() const;
};

bool operator==(const ActionSpec& a, const ActionSpec& b);

// D x L matrix of per-level digits, stored row-major by dimension.
class DiscreteAction {
 public:
  DiscreteAction() = default;
  DiscreteAction(int dims, int levels);
  DiscreteAction(int dims, int levels, std::vector<int> indices);

  int dims() const { return dims_; }
  int levels() const { return levels_; }
  int& at(int dim, int level) { return indices_[static_cast<std::size_t>(dim * levels_ + level)]; }
  int at(int dim, int level) const { return indices_[static_cast<std::size_t>(dim * levels_ + level)]; }
  const std::vector<int>& indices() const { return indices_; }

  // Global fine index of one dimension (sum_l B^(L-1-l) * digit_l).
  std::int64_t global(int dim, int bins_per_level) const;

  friend bool operator==(const DiscreteAction&, const DiscreteAction&) = default;

 private:
  int dims_ = 0;
  int levels_ = 0;
  std::vector<int> indices_;
};

using ContinuousAction = std::vector<double>;

double clamp_to_range(const ActionSpec& spec, int dim, double value);

// Center of fine bin `global_index` in dimension `dim`.
double bin_center(const ActionSpec& spec, int dim, std::int64_t global_index);

// Nearest fine center per dimension after clamping; exact midpoints go to the
// lower index.
std::int64_t encode_dim(const ActionSpec& spec, int dim, double value);
DiscreteAction encode(const ActionSpec& spec, std::span<const double> action);

ContinuousAction decode(const ActionSpec& spec, const DiscreteAction& action);

std::vector<int> level_decompose(const ActionSpec& spec, std::int64_t global_index);
std::int64_t level_recompose(const ActionSpec& spec, std::span<const int> digits);

// Validates digit ranges and shape against the ActionSpec.
void check_action(const ActionSpec& spec, const DiscreteAction& action);

DiscreteAction from_global(const ActionSpec& spec, std::span<const std::int64_t> globals);

}  // namespace arsq
