#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bmil/errors.hpp"

namespace bmil {

// Axis-aligned solid rectangle.
struct Wall {
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;

  bool contains(double x, double y) const {
    return x > xmin && x < xmax && y > ymin && y < ymax;
  }
};

// Axis-aligned box, one [lo, hi] interval per dimension.
struct Box {
  std::vector<double> lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(std::span<const double> x) const;
  std::vector<double> clip(std::span<const double> x) const;
};

enum class Task { maze, push };

// Maze state: (px, py, vx, vy). Push state: (gripper xy, object xy,
// object - gripper relative xy); the gripper is velocity-controlled
// directly, so there are no velocity dimensions.
struct EnvSpec {
  std::string name;
  Task task = Task::maze;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 0;
  double dt = 0.0;
  std::vector<Wall> walls;
  std::vector<double> init_state;
  Box init_region;    // start-position box (the epsilon-neighborhood of s0)
  std::vector<double> goal;
  double goal_radius = 0.0;
  Box eval_region;    // evaluation start-position box, strict superset of init_region
  Box action_bounds;  // per action dimension
  Box state_bounds;   // per state dimension, used to clip imagined traces
  double speed_max = 0.0;       // maze per-axis velocity clamp
  double contact_radius = 0.0;  // push: gripper disc + object disc

  int position_dim() const { return 2; }
  // First index of the task-relevant position inside the state vector
  // (agent for mazes, object for push).
  int success_pos_offset() const { return task == Task::push ? 2 : 0; }
};

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
};

struct StepResult {
  std::vector<double> state;
  bool success = false;
};

// Throws ValidationError if any EnvSpec invariant fails.
void validate_spec(const EnvSpec& spec);

bool in_any_wall(const EnvSpec& spec, double x, double y);

// Default reset returns init_state; an override (validated: start position
// inside eval_region, outside walls, finite) is used verbatim except that
// push-task relative coordinates are recomputed for consistency.
std::vector<double> env_reset(const EnvSpec& spec,
                              const std::optional<std::vector<double>>& override_state = {});

// Deterministic step. Actions are clipped to action_bounds before dynamics.
StepResult env_step(const EnvSpec& spec, std::span<const double> state,
                    std::span<const double> action);

bool is_success(const EnvSpec& spec, std::span<const double> state);

// Build a full state vector with the agent/gripper at `position`; all other
// dimensions copy init_state (push relative coords recomputed). `velocity`,
// if given, fills the velocity dims of maze states.
std::vector<double> state_at(const EnvSpec& spec, std::span<const double> position,
                             std::span<const double> velocity = {});

// The four environments shipped with this artifact.
std::vector<EnvSpec> builtin_specs();
EnvSpec spec_by_name(const std::string& name);

// JSON round trip. Unknown fields are rejected on import.
std::string spec_to_json(const EnvSpec& spec);
EnvSpec spec_from_json(const std::string& text);

}  // namespace bmil
