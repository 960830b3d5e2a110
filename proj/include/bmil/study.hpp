#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bmil/evalharness.hpp"
#include "bmil/imitation.hpp"

namespace bmil {

inline constexpr const char* kToolVersion = "bmil 0.1.0";

std::string sha1_hex(std::string_view data);
std::string sha1_file(const std::string& path);

// Demonstration defaults per environment: (count, replication).
struct DemoPreset {
  int n_demos = 0;
  int replication = 1;
};
DemoPreset demo_preset(const std::string& env_name);

// Generates (or reuses) the canonical demo file for (env, n, replication,
// seed) under `dir`; returns its path.
std::string ensure_demo_file(const EnvSpec& spec, int n_demos, int replication,
                             std::uint64_t seed, const std::string& dir);

std::string config_to_json(const TrainConfig& config);
// Parses a config JSON object; missing keys keep the values from `base`.
TrainConfig config_from_json(const std::string& text, const TrainConfig& base);

std::string sampler_to_json(const InitSampler& sampler);
InitSampler sampler_from_json(const std::string& text);

// One train-plus-eval unit.
struct RunSpec {
  std::string name;    // directory name, e.g. "bmil_seed3"
  std::string method;  // aggregation label, e.g. "bmil"
  TrainConfig config;
  std::string demo_path;
  InitSampler sampler;
  std::uint64_t eval_seed = 0;
  int eval_workers = 1;
};

struct RunOutput {
  std::string dir;
  std::string method;
  RobustnessReport report;
  long policy_grad_steps = 0;
  long model_grad_steps = 0;
  bool reused = false;  // manifest matched, artifacts left untouched
  bool failed = false;
  std::string error;
};

// Trains and writes checkpoints, training log and manifest into out_dir;
// no evaluation.
TrainResult train_to_dir(const EnvSpec& spec, const TrainConfig& config,
                         const std::string& demo_path, const std::string& out_dir);

// Trains, checkpoints, evaluates and writes the manifest under
// out_root/name. A rerun whose manifest and artifact hashes already match
// is a no-op.
RunOutput execute_run(const EnvSpec& spec, const RunSpec& run, const std::string& out_root);

// Executes independent runs, at most n_workers concurrently.
std::vector<RunOutput> execute_runs(const std::vector<RunSpec>& runs,
                                    const std::string& out_root, int n_workers);

// Per-method pooling across seeds.
struct MethodAggregate {
  std::string method;
  int pooled_successes = 0;
  int pooled_trials = 0;
  double pooled_rate = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // Wilson on the pooled counts
  double seed_mean_rate = 0.0;
  std::vector<double> per_seed_rates;
};
MethodAggregate aggregate_method(const std::string& method,
                                 const std::vector<RobustnessReport>& reports);

void write_aggregate_csv(const std::vector<MethodAggregate>& rows, const std::string& path);

struct StudyOptions {
  std::string env = "push-box";
  int n_seeds = 3;
  std::uint64_t base_seed = 1;
  int n_eval = 600;         // uniform-sampler trials per seed
  int n_workers = 2;
  std::vector<int> demo_counts = {3, 5, 10, 20};  // demo-count study
  std::vector<int> budgets = {1, 2, 5};           // budget study
  // Optional preset overrides (0 keeps the preset value); mainly for fast
  // smoke runs of the study machinery.
  int epochs_override = 0;
  int policy_steps_override = 0;
  int model_steps_override = 0;
};

struct StudyResult {
  std::string dir;
  std::vector<MethodAggregate> aggregates;
  std::vector<RunOutput> runs;
  bool incomplete = false;
};

// Named experiment presets: "robustness", "fwd-vs-bwd", "strategy",
// "demo-count", "budget", "model-first".
std::vector<std::string> study_names();
StudyResult run_study(const std::string& study, const StudyOptions& options,
                      const std::string& out_root);

}  // namespace bmil
