#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmil/demgen.hpp"
#include "bmil/envsim.hpp"
#include "bmil/numcore.hpp"
#include "bmil/rng.hpp"

namespace bmil {

// Reverse-time generative model p(s_t, a_t | s_{t+1}), decomposed into an
// action generator p(a_t | s_{t+1}) and a previous-state generator
// p(s_t | a_t, s_{t+1}). Heads live in normalized space.
struct BackwardsModel {
  NetParams action_net;  // input s_{t+1}, Gaussian over a_t
  NetParams state_net;   // input (a_t, s_{t+1}), Gaussian over s_t
  Normalizer state_norm;
  Normalizer action_norm;
  // Optimizer state, carried across epoch-wise training calls. Not part of
  // the persisted checkpoint.
  AdamState adam_action;
  AdamState adam_state;
};

enum class PerturbKind { none, resample, scale };

// First-action perturbation for trace generation: `resample` adds uniform
// noise U[-coef, coef] per dimension; `scale` widens sigma by
// 1 + coef * exp(-H/d) with H the distribution's differential entropy.
struct PerturbStrategy {
  PerturbKind kind = PerturbKind::none;
  double coef = 0.0;

  static PerturbStrategy none() { return {PerturbKind::none, 0.0}; }
  static PerturbStrategy resample(double b);
  static PerturbStrategy scale(double c);
};

// Thresholded linear ramp: value x at epoch a, rising linearly to y at
// epoch b, clamped outside; evaluated values are floored to integers.
struct HorizonSchedule {
  int x = 1, y = 1;
  int a = 1, b = 2;
};

int horizon_at(const HorizonSchedule& schedule, int epoch);

// Imagined reverse-rollout pairs, stored forward-oriented. Every pair
// belongs to a trace whose backward recursion started at
// all_states(demos)[anchor_index].
struct TraceBuffer {
  Batch states;
  Batch actions;
  std::vector<int> anchor_index;
  int generation_epoch = 0;

  int size() const { return states.n; }
};

// Networks are 4 hidden layers of 256 units.
BackwardsModel make_backwards_model(const EnvSpec& spec, const DemoSet& demos,
                                    Rng& rng);

// Mean joint negative log-likelihood (action plus previous state) over the
// given transitions; the quantity the trainer minimizes.
double backwards_loss(const BackwardsModel& model, const TransitionTable& table);

// `steps` joint Adam updates on minibatches of demo transitions. Returns
// the final minibatch loss (full-table loss when steps == 0).
double train_backwards(BackwardsModel& model, const DemoSet& demos, int steps,
                       int batch_size, Rng& rng);

// One action drawn from `dist` (raw action space) under the strategy,
// clipped to bounds.
std::vector<double> perturb_first_action(const DiagGaussian& dist,
                                         const PerturbStrategy& strategy,
                                         const Box& action_bounds, Rng& rng);

// K traces of length H backwards from every demonstration state. Only the
// first backward step uses the perturbation strategy. Produces exactly
// all_states(demos).n * K * H pairs.
TraceBuffer generate_traces(const BackwardsModel& model, const EnvSpec& spec,
                            const DemoSet& demos, int K, int H,
                            const PerturbStrategy& strategy, Rng& rng);

// Debug dump, same JSON Lines float conventions as the demo files.
void dump_traces(const TraceBuffer& buffer, const std::string& path);

}  // namespace bmil
