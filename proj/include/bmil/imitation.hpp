#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bmil/backmodel.hpp"
#include "bmil/demgen.hpp"
#include "bmil/envsim.hpp"
#include "bmil/numcore.hpp"
#include "bmil/rng.hpp"

namespace bmil {

struct ForwardModel;

// Gaussian policy, 3 hidden layers of 256 units. Heads live in normalized
// space; acting denormalizes and clips to the environment action bounds.
struct Policy {
  NetParams net;
  Normalizer state_norm;
  Normalizer action_norm;
  Box action_bounds;
  AdamState adam;
};

enum class Mode { bc, bmil, bmil_model_first, fmil };

Mode mode_from_string(const std::string& s);
std::string mode_to_string(Mode m);

struct TrainConfig {
  std::string env;
  Mode mode = Mode::bc;
  int n_epochs = 0;                 // N
  int policy_steps_per_epoch = 0;   // M
  int batch_size = 0;               // B
  double p_d = 1.0;                 // demo sampling probability
  int k_traces = 1;                 // K
  HorizonSchedule schedule;
  PerturbStrategy strategy;
  int model_steps_per_epoch = 0;
  int model_batch_size = 64;
  std::uint64_t seed = 0;
};

// Per-environment default hyperparameters.
TrainConfig preset_config(const std::string& env_name, Mode mode);

// Scales the per-epoch policy step count; used to give BC a larger
// computation budget.
TrainConfig compute_budget_variant(const TrainConfig& config, int multiplier);

struct EpochLog {
  int epoch = 0;
  double model_loss = 0.0;
  double policy_loss = 0.0;
  int horizon = 0;
  int trace_pairs = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Policy policy;
  std::optional<BackwardsModel> backwards;
  std::shared_ptr<ForwardModel> forward;
  std::vector<EpochLog> log;
  long policy_grad_steps = 0;
  long model_grad_steps = 0;
};

Policy make_policy(const EnvSpec& spec, const DemoSet& demos, Rng& rng);

// Deterministic evaluation action: the Gaussian mean, clipped.
std::vector<double> policy_act(const Policy& policy, std::span<const double> state);

// Mean negative log-likelihood of the (raw) actions under the policy heads.
double bc_loss(const Policy& policy, const Batch& states, const Batch& actions);

struct MixedBatch {
  Batch states;
  Batch actions;
};

// Exactly round(p_d * B) pairs drawn uniformly from the demo transitions,
// the remainder uniformly from the trace buffer.
MixedBatch mixed_batch(const TransitionTable& demos, const TraceBuffer& traces,
                       double p_d, int B, Rng& rng);

// Algorithm: per epoch, train the model, regenerate the trace buffer, then
// take policy steps on the mixed objective. Mode bc skips model and traces;
// bmil_model_first spends the whole model budget before the first policy
// step; fmil swaps in the forward model with policy-driven rollouts.
TrainResult train(const TrainConfig& config, const EnvSpec& spec, const DemoSet& demos);

void write_train_log(const std::vector<EpochLog>& log, const std::string& path);

void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path, const EnvSpec& spec);

}  // namespace bmil
