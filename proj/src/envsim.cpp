#include "bmil/envsim.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace bmil {

namespace {

using json = nlohmann::json;

double dist2d(const double* a, const double* b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// Move one axis, clamping to the face of any wall entered and reporting
// whether the axis was blocked. Two passes cover overlapping rectangles.
bool resolve_axis(const EnvSpec& spec, double& coord, double other,
                  bool axis_is_x, double direction) {
  bool blocked = false;
  for (int pass = 0; pass < 2; ++pass) {
    for (const Wall& w : spec.walls) {
      const double x = axis_is_x ? coord : other;
      const double y = axis_is_x ? other : coord;
      if (!w.contains(x, y)) continue;
      const double lo = axis_is_x ? w.xmin : w.ymin;
      const double hi = axis_is_x ? w.xmax : w.ymax;
      coord = direction > 0.0 ? lo : hi;
      blocked = true;
    }
  }
  return blocked;
}

std::vector<double> clip_action(const EnvSpec& spec, std::span<const double> action) {
  if (static_cast<int>(action.size()) != spec.action_dim)
    throw ContractError("env_step: action dim mismatch");
  if (!all_finite(action)) throw ContractError("env_step: non-finite action");
  return spec.action_bounds.clip(action);
}

json box_to_json(const Box& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }

Box box_from_json(const json& j) {
  Box b;
  b.lo = j.at("lo").get<std::vector<double>>();
  b.hi = j.at("hi").get<std::vector<double>>();
  return b;
}

EnvSpec make_maze(const std::string& name, int horizon,
                  std::vector<Wall> inner_walls, double arena_x, double arena_y,
                  std::vector<double> start, std::vector<double> goal) {
  EnvSpec s;
  s.name = name;
  s.task = Task::maze;
  s.state_dim = 4;
  s.action_dim = 2;
  s.horizon = horizon;
  s.dt = 0.02;
  s.speed_max = 1.5;
  s.goal = std::move(goal);
  s.goal_radius = 0.10;
  const double t = 0.1;  // perimeter thickness
  s.walls = {{-t, 0.0, -t, arena_y + t},
             {arena_x, arena_x + t, -t, arena_y + t},
             {-t, arena_x + t, -t, 0.0},
             {-t, arena_x + t, arena_y, arena_y + t}};
  for (auto& w : inner_walls) s.walls.push_back(w);
  s.init_state = {start[0], start[1], 0.0, 0.0};
  s.init_region = {{start[0] - 0.02, start[1] - 0.02}, {start[0] + 0.02, start[1] + 0.02}};
  s.eval_region = {{0.04, 0.04}, {arena_x - 0.04, arena_y - 0.04}};
  s.action_bounds = {{-2.0, -2.0}, {2.0, 2.0}};
  s.state_bounds = {{0.0, 0.0, -s.speed_max, -s.speed_max},
                    {arena_x, arena_y, s.speed_max, s.speed_max}};
  return s;
}

}  // namespace

bool Box::contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

std::vector<double> Box::clip(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) throw ContractError("box clip: dim mismatch");
  std::vector<double> y(x.begin(), x.end());
  for (int i = 0; i < dim(); ++i) y[i] = std::clamp(y[i], lo[i], hi[i]);
  return y;
}

void validate_spec(const EnvSpec& spec) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("spec '" + spec.name + "': " + msg);
  };
  if (spec.name.empty()) fail("empty name");
  if (spec.state_dim <= 0 || spec.action_dim <= 0) fail("non-positive dims");
  if (spec.horizon <= 0) fail("non-positive horizon");
  if (spec.dt <= 0.0) fail("non-positive dt");
  if (static_cast<int>(spec.init_state.size()) != spec.state_dim) fail("init_state dim");
  if (!all_finite(spec.init_state)) fail("non-finite init_state");
  if (spec.goal.size() != 2) fail("goal must be a 2d position");
  if (spec.goal_radius <= 0.0) fail("goal_radius must be positive");
  if (spec.init_region.dim() != 2 || spec.eval_region.dim() != 2) fail("region boxes must be 2d");
  if (spec.action_bounds.dim() != spec.action_dim) fail("action_bounds dim");
  if (spec.state_bounds.dim() != spec.state_dim) fail("state_bounds dim");
  for (int i = 0; i < 2; ++i) {
    if (spec.init_region.lo[i] > spec.init_region.hi[i]) fail("init_region inverted");
    // Strict containment: S_R is a strict superset of the start region.
    if (!(spec.eval_region.lo[i] < spec.init_region.lo[i] &&
          spec.init_region.hi[i] < spec.eval_region.hi[i]))
      fail("init_region must be strictly inside eval_region");
  }
  const double* start_pos = spec.init_state.data();
  if (!spec.init_region.contains(std::span<const double>(start_pos, 2)))
    fail("init_state position outside init_region");
  const double* task_pos = spec.init_state.data() + spec.success_pos_offset();
  if (dist2d(task_pos, spec.goal.data()) < spec.goal_radius)
    fail("initial state already inside the goal ball");
  for (const Wall& w : spec.walls) {
    if (w.xmin >= w.xmax || w.ymin >= w.ymax) fail("degenerate wall rectangle");
    if (w.contains(start_pos[0], start_pos[1])) fail("wall contains init position");
    if (w.contains(spec.goal[0], spec.goal[1])) fail("wall contains goal");
  }
  if (spec.task == Task::maze) {
    if (spec.state_dim != 4) fail("maze state must be (px, py, vx, vy)");
    if (spec.speed_max <= 0.0) fail("maze needs positive speed_max");
  } else {
    if (spec.state_dim != 6) fail("push state must be (grip, obj, rel)");
    if (spec.contact_radius <= 0.0) fail("push needs positive contact_radius");
  }
}

bool in_any_wall(const EnvSpec& spec, double x, double y) {
  return std::any_of(spec.walls.begin(), spec.walls.end(),
                     [&](const Wall& w) { return w.contains(x, y); });
}

std::vector<double> env_reset(const EnvSpec& spec,
                              const std::optional<std::vector<double>>& override_state) {
  if (!override_state) return spec.init_state;
  const auto& s = *override_state;
  if (static_cast<int>(s.size()) != spec.state_dim)
    throw ValidationError("reset override: state dim mismatch");
  if (!all_finite(s)) throw ValidationError("reset override: non-finite state");
  if (in_any_wall(spec, s[0], s[1]))
    throw ValidationError("reset override: placement inside a wall");
  if (!spec.eval_region.contains(std::span<const double>(s.data(), 2)))
    throw ValidationError("reset override: position outside eval_region");
  std::vector<double> out = s;
  if (spec.task == Task::push) {
    out[4] = out[2] - out[0];
    out[5] = out[3] - out[1];
  }
  return out;
}

StepResult env_step(const EnvSpec& spec, std::span<const double> state,
                    std::span<const double> action) {
  if (static_cast<int>(state.size()) != spec.state_dim)
    throw ContractError("env_step: state dim mismatch");
  if (!all_finite(state)) throw ContractError("env_step: non-finite state");
  const auto a = clip_action(spec, action);

  StepResult r;
  r.state.assign(state.begin(), state.end());
  if (spec.task == Task::maze) {
    double vx = std::clamp(state[2] + a[0] * spec.dt, -spec.speed_max, spec.speed_max);
    double vy = std::clamp(state[3] + a[1] * spec.dt, -spec.speed_max, spec.speed_max);
    double px = state[0] + vx * spec.dt;
    if (resolve_axis(spec, px, state[1], true, vx)) vx = 0.0;
    double py = state[1] + vy * spec.dt;
    if (resolve_axis(spec, py, px, false, vy)) vy = 0.0;
    r.state = {px, py, vx, vy};
  } else {
    double gx = state[0] + a[0] * spec.dt;
    resolve_axis(spec, gx, state[1], true, a[0]);
    double gy = state[1] + a[1] * spec.dt;
    resolve_axis(spec, gy, gx, false, a[1]);
    double ox = state[2], oy = state[3];
    const double d = std::hypot(ox - gx, oy - gy);
    if (d < spec.contact_radius) {
      double ux = 1.0, uy = 0.0;
      if (d > 1e-12) {
        ux = (ox - gx) / d;
        uy = (oy - gy) / d;
      }
      ox = gx + spec.contact_radius * ux;
      oy = gy + spec.contact_radius * uy;
      ox = std::clamp(ox, spec.state_bounds.lo[2], spec.state_bounds.hi[2]);
      oy = std::clamp(oy, spec.state_bounds.lo[3], spec.state_bounds.hi[3]);
    }
    r.state = {gx, gy, ox, oy, ox - gx, oy - gy};
  }
  r.success = is_success(spec, r.state);
  return r;
}

bool is_success(const EnvSpec& spec, std::span<const double> state) {
  if (static_cast<int>(state.size()) != spec.state_dim)
    throw ContractError("is_success: state dim mismatch");
  const double* pos = state.data() + spec.success_pos_offset();
  // Strict inequality: the goal ball boundary does not count.
  return dist2d(pos, spec.goal.data()) < spec.goal_radius;
}

std::vector<double> state_at(const EnvSpec& spec, std::span<const double> position,
                             std::span<const double> velocity) {
  if (position.size() != 2) throw ContractError("state_at: position must be 2d");
  std::vector<double> s = spec.init_state;
  s[0] = position[0];
  s[1] = position[1];
  if (spec.task == Task::maze) {
    if (!velocity.empty()) {
      if (velocity.size() != 2) throw ContractError("state_at: velocity must be 2d");
      s[2] = velocity[0];
      s[3] = velocity[1];
    }
  } else {
    s[4] = s[2] - s[0];
    s[5] = s[3] - s[1];
  }
  return s;
}

std::vector<EnvSpec> builtin_specs() {
  std::vector<EnvSpec> specs;

  // U-shaped bar attached to the left wall; pass on the right.
  specs.push_back(make_maze("point-umaze", 150,
                            {{-0.05, 0.55, 0.40, 0.60}}, 1.0, 1.0,
                            {0.18, 0.20}, {0.18, 0.80}));

  // Two rooms joined by a doorway in the divider.
  specs.push_back(make_maze("point-rooms", 200,
                            {{0.64, 0.76, -0.05, 0.38}, {0.64, 0.76, 0.62, 1.05}},
                            1.4, 1.0, {0.20, 0.25}, {1.15, 0.75}));

  // S-shaped corridor: two alternating bars.
  specs.push_back(make_maze("point-corridor", 250,
                            {{-0.05, 0.78, 0.36, 0.48}, {0.42, 1.25, 0.72, 0.84}},
                            1.2, 1.2, {0.15, 0.18}, {1.02, 1.02}));

  EnvSpec push;
  push.name = "push-box";
  push.task = Task::push;
  push.state_dim = 6;
  push.action_dim = 2;
  push.horizon = 50;
  push.dt = 0.02;
  push.contact_radius = 0.08;
  push.goal = {0.72, 0.50};
  push.goal_radius = 0.06;
  const double t = 0.1;
  push.walls = {{-t, 0.0, -t, 1.0 + t},
                {1.0, 1.0 + t, -t, 1.0 + t},
                {-t, 1.0 + t, -t, 0.0},
                {-t, 1.0 + t, 1.0, 1.0 + t}};
  push.init_state = {0.20, 0.50, 0.45, 0.50, 0.25, 0.0};
  push.init_region = {{0.19, 0.49}, {0.21, 0.51}};
  push.eval_region = {{0.05, 0.10}, {0.85, 0.90}};
  push.action_bounds = {{-1.0, -1.0}, {1.0, 1.0}};
  push.state_bounds = {{0.0, 0.0, 0.0, 0.0, -1.0, -1.0},
                       {1.0, 1.0, 1.0, 1.0, 1.0, 1.0}};
  specs.push_back(push);

  for (const auto& s : specs) validate_spec(s);
  return specs;
}

EnvSpec spec_by_name(const std::string& name) {
  for (auto& s : builtin_specs())
    if (s.name == name) return s;
  throw ValidationError("unknown environment: " + name);
}

std::string spec_to_json(const EnvSpec& spec) {
  json walls = json::array();
  for (const Wall& w : spec.walls)
    walls.push_back({{"xmin", w.xmin}, {"xmax", w.xmax}, {"ymin", w.ymin}, {"ymax", w.ymax}});
  json j{{"name", spec.name},
         {"task", spec.task == Task::maze ? "maze" : "push"},
         {"state_dim", spec.state_dim},
         {"action_dim", spec.action_dim},
         {"horizon", spec.horizon},
         {"dt", spec.dt},
         {"walls", walls},
         {"init_state", spec.init_state},
         {"init_region", box_to_json(spec.init_region)},
         {"goal", spec.goal},
         {"goal_radius", spec.goal_radius},
         {"eval_region", box_to_json(spec.eval_region)},
         {"action_bounds", box_to_json(spec.action_bounds)},
         {"state_bounds", box_to_json(spec.state_bounds)},
         {"speed_max", spec.speed_max},
         {"contact_radius", spec.contact_radius}};
  return j.dump(2);
}

EnvSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("spec json: ") + e.what());
  }
  static const std::vector<std::string> known = {
      "name", "task", "state_dim", "action_dim", "horizon", "dt", "walls",
      "init_state", "init_region", "goal", "goal_radius", "eval_region",
      "action_bounds", "state_bounds", "speed_max", "contact_radius"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ParseError("spec json: unknown field '" + it.key() + "'");
  }
  try {
    EnvSpec s;
    s.name = j.at("name").get<std::string>();
    const std::string task = j.at("task").get<std::string>();
    if (task == "maze")
      s.task = Task::maze;
    else if (task == "push")
      s.task = Task::push;
    else
      throw ParseError("spec json: unknown task '" + task + "'");
    s.state_dim = j.at("state_dim").get<int>();
    s.action_dim = j.at("action_dim").get<int>();
    s.horizon = j.at("horizon").get<int>();
    s.dt = j.at("dt").get<double>();
    for (const auto& w : j.at("walls"))
      s.walls.push_back({w.at("xmin").get<double>(), w.at("xmax").get<double>(),
                         w.at("ymin").get<double>(), w.at("ymax").get<double>()});
    s.init_state = j.at("init_state").get<std::vector<double>>();
    s.init_region = box_from_json(j.at("init_region"));
    s.goal = j.at("goal").get<std::vector<double>>();
    s.goal_radius = j.at("goal_radius").get<double>();
    s.eval_region = box_from_json(j.at("eval_region"));
    s.action_bounds = box_from_json(j.at("action_bounds"));
    s.state_bounds = box_from_json(j.at("state_bounds"));
    s.speed_max = j.at("speed_max").get<double>();
    s.contact_radius = j.at("contact_radius").get<double>();
    validate_spec(s);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("spec json: ") + e.what());
  }
}

}  // namespace bmil
