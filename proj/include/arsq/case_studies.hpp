#pragma once

#include "arsq/config.hpp"
#include "arsq/envs.hpp"
#include "arsq/oracle.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace arsq {

// ---- motivating example -----------------------------------------------------

struct ToyOptions {
  int samples = 1000;
  double alpha = 0.01;
  oracle::FitOptions fit;  // plain gradient descent, lr 0.1, 20k steps
};

struct ToyVerdict {
  std::string method;
  std::array<int, 2> argmax_cell{0, 0};
  std::array<int, 2> optimal_cell{0, 0};
  bool optimal() const { return argmax_cell == optimal_cell; }
};

struct ToyResult {
  std::uint64_t seed = 0;
  ToyVerdict arsq;
  ToyVerdict independent;
  LandscapeGrid arsq_grid;         // 2 x 2, at cell centers
  LandscapeGrid independent_grid;  // 2 x 2, at cell centers
};

// Mode-mix dataset on a 2 x 2 lattice, tabular ARSQ vs tabular independent
// fits. With a non-empty out_dir writes toy_dataset.jsonl,
// toy_grid_arsq.csv, toy_grid_independent.csv and toy_verdict.csv.
ToyResult case_study_toy(const std::filesystem::path& out_dir, std::uint64_t seed, const ToyOptions& options = {});

// ---- landscape error --------------------------------------------------------

struct LandscapeOptions {
  int train_samples = 2000;
  int eval_samples = 1000;
  int bins = 5;
  int levels = 2;
  std::vector<int> hidden_widths{64, 64};
  int steps = 3000;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double alpha = 0.01;
  int grid_resolution = 41;
};

struct LandscapeMethodResult {
  std::string method;  // independent, arsq_no_cf, arsq
  std::uint64_t seed = 0;
  double mae = 0.0;
  bool diverged = false;
  std::string error;
  LandscapeGrid grid;
};

struct LandscapeResult {
  std::vector<LandscapeMethodResult> runs;  // method-major within each seed
  double mean_mae(const std::string& method) const;
};

// With a non-empty out_dir writes landscape_mae.csv, landscape_truth.csv and
// one landscape_grid_<method>_seed<k>.csv per run.
LandscapeResult case_study_landscape(const std::filesystem::path& out_dir, const std::vector<std::uint64_t>& seeds,
                                     const LandscapeOptions& options = {});

}  // namespace arsq
