#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmil/envsim.hpp"
#include "bmil/numcore.hpp"
#include "bmil/rng.hpp"

namespace bmil {

struct Episode {
  std::vector<Transition> transitions;
  bool success = false;

  std::size_t n_states() const { return transitions.size() + 1; }
};

struct DemoSet {
  std::string spec_name;
  std::vector<Episode> episodes;
  int replication_factor = 1;
  std::uint64_t seed = 0;

  std::size_t total_transitions() const;
  std::size_t total_states() const;  // transitions + 1 per episode
};

// Flattened (s, a, s') arrays for minibatch training.
struct TransitionTable {
  Batch states;
  Batch actions;
  Batch next_states;
};
TransitionTable flatten(const DemoSet& demos);

// All states appearing in the demonstrations (including episode-final
// states); the anchors for backwards traces.
Batch all_states(const DemoSet& demos);

// Waypoint chain used by the scripted expert for a builtin maze; empty for
// the push task (its controller is phase-based).
std::vector<std::vector<double>> builtin_waypoints(const EnvSpec& spec);

// Proportional-derivative action toward the first waypoint in `waypoints`
// that is not already within the arrival radius. Callers progressing along
// a path should pass the not-yet-reached suffix.
std::vector<double> expert_action(const EnvSpec& spec, std::span<const double> state,
                                  const std::vector<std::vector<double>>& waypoints);

// Rolls the scripted expert from `start` until success or the horizon.
Episode run_expert(const EnvSpec& spec, std::span<const double> start);

// n successful expert episodes from starts sampled uniformly in
// init_region. Throws GenerationError if the expert ever fails.
DemoSet generate_demos(const EnvSpec& spec, int n_demos, std::uint64_t seed);

DemoSet replicate_demos(const DemoSet& demos, int k);

// JSON Lines; floats serialized as 17-significant-digit decimal strings so
// round trips are bit-exact.
void save_demos(const DemoSet& demos, const std::string& path);
DemoSet load_demos(const std::string& path);
// Load plus consistency checks against the environment the data is for.
DemoSet load_demos_for(const std::string& path, const EnvSpec& spec);

}  // namespace bmil
