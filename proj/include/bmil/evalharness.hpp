#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmil/envsim.hpp"
#include "bmil/imitation.hpp"
#include "bmil/rng.hpp"

namespace bmil {

// How evaluation start states are drawn. Grid and uniform samplers draw
// positions from the eval region (S_R); the training sampler mirrors the
// demonstration start distribution.
struct InitSampler {
  enum class Kind { grid, uniform, training };
  Kind kind = Kind::uniform;
  int cells_x = 0, cells_y = 0, samples_per_cell = 0;  // grid
  Box region;       // uniform; empty -> spec.eval_region
  int n_samples = 0;
  Box velocity_noise;  // maze velocity dims; empty -> U[-0.1, 0.1]^2

  static InitSampler grid(int cx, int cy, int per_cell);
  static InitSampler uniform(int n);
  static InitSampler uniform_in(const Box& region, int n);
  static InitSampler training(int n);
};

struct CellStats {
  int successes = 0;
  int trials = 0;
};

struct RobustnessReport {
  std::string method;
  std::string env;
  std::uint64_t seed = 0;
  double overall_rate = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // Wilson 95%
  int n_trials = 0;
  int n_success = 0;
  int n_skipped = 0;  // wall-blocked draws abandoned after 100 attempts
  int cells_x = 0, cells_y = 0;
  std::vector<CellStats> per_cell;  // row-major, row 0 at the region's low y
};

struct RolloutResult {
  bool success = false;
  int steps_used = 0;
};

// Runs the policy from init_state until the goal is reached or the horizon
// expires. The initial state itself counts.
RolloutResult rollout(const Policy& policy, const EnvSpec& spec,
                      const std::vector<double>& init_state);

// Wilson score interval at confidence z (default 95%).
std::pair<double, double> wilson_ci(int successes, int trials, double z = 1.96);

// Success-rate sweep over sampled initial states. Deterministic given the
// seed and independent of n_workers.
RobustnessReport evaluate(const Policy& policy, const EnvSpec& spec,
                          const InitSampler& sampler, std::uint64_t seed,
                          int n_workers = 1);

struct ComparisonRow {
  std::string method;
  double rate = 0.0, ci_low = 0.0, ci_high = 0.0;
  double ratio_to_bc = 0.0;
};

// Absolute rates plus ratios relative to the "bc" row, which must exist.
std::vector<ComparisonRow> compare(const std::vector<RobustnessReport>& reports);

std::string report_to_json(const RobustnessReport& report);
RobustnessReport report_from_json(const std::string& text);
void save_report(const RobustnessReport& report, const std::string& path);
RobustnessReport load_report(const std::string& path);

// Per-cell CSV: row, col, successes, trials, rate.
void write_per_cell_csv(const RobustnessReport& report, const std::string& path);
// Comparison CSV: method, rate, ci_low, ci_high, ratio_to_bc.
void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::string& path);
// Colored-cell SVG, linear ramp from 0 (dark purple) to 1 (bright yellow);
// cells with no completed trials are drawn gray.
std::string heatmap_svg(const RobustnessReport& report);
void write_heatmap_svg(const RobustnessReport& report, const std::string& path);

}  // namespace bmil
