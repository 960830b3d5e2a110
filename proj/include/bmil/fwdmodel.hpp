#pragma once

#include "bmil/backmodel.hpp"
#include "bmil/demgen.hpp"
#include "bmil/envsim.hpp"
#include "bmil/imitation.hpp"
#include "bmil/numcore.hpp"
#include "bmil/rng.hpp"

namespace bmil {

// Forward-dynamics ablation p(s' | s, a), rolled out with policy actions.
struct ForwardModel {
  NetParams net;  // input (s, a), Gaussian over s'
  Normalizer state_norm;
  Normalizer action_norm;
  AdamState adam;
};

// Hidden width sized so the single net's parameter count stays within 10%
// of the two backwards nets combined.
ForwardModel make_forward_model(const EnvSpec& spec, const DemoSet& demos, Rng& rng);

double forward_loss(const ForwardModel& model, const TransitionTable& table);

double train_forward(ForwardModel& model, const DemoSet& demos, int steps,
                     int batch_size, Rng& rng);

// K forward rollouts of length H from every demonstration state, actions
// taken as the policy mean, next states sampled from the model.
TraceBuffer generate_forward_traces(const ForwardModel& model, const Policy& policy,
                                    const EnvSpec& spec, const DemoSet& demos,
                                    int K, int H, Rng& rng);

}  // namespace bmil
