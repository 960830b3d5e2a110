#include "bmil/demgen.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace bmil {

namespace {

using json = nlohmann::json;

// PD gains, frozen after tuning once against the builtin layouts.
constexpr double kP = 8.0;
constexpr double kD = 2.5;
constexpr double kWaypointRadius = 0.1;

// Push controller offsets relative to contact_radius.
constexpr double kApproachSlack = 0.03;
constexpr double kApproachTol = 0.035;

std::vector<double> pd_toward(const EnvSpec& spec, std::span<const double> state,
                              const double* target) {
  std::vector<double> a(spec.action_dim, 0.0);
  const double vx = spec.task == Task::maze ? state[2] : 0.0;
  const double vy = spec.task == Task::maze ? state[3] : 0.0;
  a[0] = kP * (target[0] - state[0]) - kD * vx;
  a[1] = kP * (target[1] - state[1]) - kD * vy;
  return spec.action_bounds.clip(a);
}

std::vector<double> push_expert_action(const EnvSpec& spec, std::span<const double> state) {
  const double gx = state[0], gy = state[1];
  const double ox = state[2], oy = state[3];
  double ux = spec.goal[0] - ox, uy = spec.goal[1] - oy;
  const double glen = std::hypot(ux, uy);
  if (glen > 1e-9) {
    ux /= glen;
    uy /= glen;
  } else {
    ux = 1.0;
    uy = 0.0;
  }
  const double along = (gx - ox) * ux + (gy - oy) * uy;   // >0: goal side
  const double across = (gx - ox) * -uy + (gy - oy) * ux;
  double target[2];
  if (along > -0.02 && std::abs(across) < spec.contact_radius + 0.04) {
    // In front of (or beside) the object near the push line: step off the
    // line before circling behind, so the detour never shoves the object.
    const double side = across >= 0.0 ? 1.0 : -1.0;
    target[0] = ox - uy * side * (spec.contact_radius + 0.07);
    target[1] = oy + ux * side * (spec.contact_radius + 0.07);
  } else {
    const double behind = spec.contact_radius + kApproachSlack;
    const double bx = ox - ux * behind, by = oy - uy * behind;
    if (std::hypot(gx - bx, gy - by) > kApproachTol) {
      target[0] = bx;
      target[1] = by;
    } else {
      // Push through the object center toward the goal.
      target[0] = ox + ux * 0.05;
      target[1] = oy + uy * 0.05;
    }
  }
  return pd_toward(spec, state, target);
}

}  // namespace

std::size_t DemoSet::total_transitions() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.transitions.size();
  return n;
}

std::size_t DemoSet::total_states() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.n_states();
  return n;
}

TransitionTable flatten(const DemoSet& demos) {
  if (demos.episodes.empty()) throw ContractError("flatten: empty demo set");
  const int sd = static_cast<int>(demos.episodes[0].transitions[0].s.size());
  const int ad = static_cast<int>(demos.episodes[0].transitions[0].a.size());
  const int n = static_cast<int>(demos.total_transitions());
  TransitionTable t;
  t.states = Batch(n, sd);
  t.actions = Batch(n, ad);
  t.next_states = Batch(n, sd);
  int i = 0;
  for (const auto& e : demos.episodes) {
    for (const auto& tr : e.transitions) {
      std::copy(tr.s.begin(), tr.s.end(), t.states.row(i));
      std::copy(tr.a.begin(), tr.a.end(), t.actions.row(i));
      std::copy(tr.s_next.begin(), tr.s_next.end(), t.next_states.row(i));
      ++i;
    }
  }
  return t;
}

Batch all_states(const DemoSet& demos) {
  if (demos.episodes.empty()) throw ContractError("all_states: empty demo set");
  const int sd = static_cast<int>(demos.episodes[0].transitions[0].s.size());
  Batch b(static_cast<int>(demos.total_states()), sd);
  int i = 0;
  for (const auto& e : demos.episodes) {
    for (const auto& tr : e.transitions) {
      std::copy(tr.s.begin(), tr.s.end(), b.row(i++));
    }
    const auto& last = e.transitions.back().s_next;
    std::copy(last.begin(), last.end(), b.row(i++));
  }
  return b;
}

std::vector<std::vector<double>> builtin_waypoints(const EnvSpec& spec) {
  if (spec.name == "point-umaze")
    return {{0.72, 0.20}, {0.72, 0.80}, {0.18, 0.80}};
  if (spec.name == "point-rooms")
    return {{0.70, 0.50}, {1.15, 0.75}};
  if (spec.name == "point-corridor")
    return {{0.99, 0.18}, {0.99, 0.60}, {0.21, 0.60}, {0.21, 1.02}, {1.02, 1.02}};
  if (spec.task == Task::push) return {};
  throw ValidationError("no builtin waypoints for environment: " + spec.name);
}

std::vector<double> expert_action(const EnvSpec& spec, std::span<const double> state,
                                  const std::vector<std::vector<double>>& waypoints) {
  if (spec.task == Task::push) return push_expert_action(spec, state);
  if (waypoints.empty()) throw ContractError("expert_action: maze expert needs waypoints");
  std::size_t i = 0;
  while (i + 1 < waypoints.size() &&
         std::hypot(state[0] - waypoints[i][0], state[1] - waypoints[i][1]) < kWaypointRadius)
    ++i;
  return pd_toward(spec, state, waypoints[i].data());
}

Episode run_expert(const EnvSpec& spec, std::span<const double> start) {
  const auto waypoints = builtin_waypoints(spec);
  Episode ep;
  std::vector<double> state(start.begin(), start.end());
  std::size_t next_wp = 0;
  for (int t = 0; t < spec.horizon; ++t) {
    std::vector<double> a;
    if (spec.task == Task::push) {
      a = push_expert_action(spec, state);
    } else {
      while (next_wp + 1 < waypoints.size() &&
             std::hypot(state[0] - waypoints[next_wp][0],
                        state[1] - waypoints[next_wp][1]) < kWaypointRadius)
        ++next_wp;
      std::vector<std::vector<double>> rest(waypoints.begin() + next_wp, waypoints.end());
      a = expert_action(spec, state, rest);
    }
    StepResult r = env_step(spec, state, a);
    ep.transitions.push_back({state, a, r.state});
    state = r.state;
    if (r.success) {
      ep.success = true;
      break;
    }
  }
  return ep;
}

DemoSet generate_demos(const EnvSpec& spec, int n_demos, std::uint64_t seed) {
  if (n_demos <= 0) throw ContractError("generate_demos: n_demos must be positive");
  Rng rng = Rng::stream(seed, "demo");
  DemoSet demos;
  demos.spec_name = spec.name;
  demos.seed = seed;
  demos.replication_factor = 1;
  for (int i = 0; i < n_demos; ++i) {
    std::vector<double> pos(2);
    for (int tries = 0;; ++tries) {
      pos[0] = rng.uniform(spec.init_region.lo[0], spec.init_region.hi[0]);
      pos[1] = rng.uniform(spec.init_region.lo[1], spec.init_region.hi[1]);
      if (!in_any_wall(spec, pos[0], pos[1])) break;
      if (tries > 1000)
        throw GenerationError("generate_demos: init_region blocked by walls");
    }
    const auto start = state_at(spec, pos);
    Episode ep = run_expert(spec, start);
    if (!ep.success)
      throw GenerationError("expert failed to reach the goal on '" + spec.name +
                            "' episode " + std::to_string(i));
    demos.episodes.push_back(std::move(ep));
  }
  return demos;
}

DemoSet replicate_demos(const DemoSet& demos, int k) {
  if (k < 1) throw ContractError("replicate_demos: k must be >= 1");
  DemoSet out;
  out.spec_name = demos.spec_name;
  out.seed = demos.seed;
  out.replication_factor = demos.replication_factor * k;
  out.episodes.reserve(demos.episodes.size() * k);
  for (int i = 0; i < k; ++i)
    for (const auto& e : demos.episodes) out.episodes.push_back(e);
  return out;
}

namespace {

std::string f64_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json vec_strs(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(f64_str(x));
  return a;
}

std::vector<double> strs_vec(const json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& s : a) v.push_back(std::strtod(s.get<std::string>().c_str(), nullptr));
  return v;
}

}  // namespace

void save_demos(const DemoSet& demos, const std::string& path) {
  if (demos.episodes.empty()) throw ContractError("save_demos: empty demo set");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open demo file for writing: " + path);
  json header{{"spec_name", demos.spec_name},
              {"seed", std::to_string(demos.seed)},
              {"replication_factor", demos.replication_factor},
              {"n_episodes", demos.episodes.size()},
              {"n_transitions", demos.total_transitions()}};
  os << header.dump() << "\n";
  for (const auto& e : demos.episodes) {
    json states = json::array();
    json actions = json::array();
    for (const auto& tr : e.transitions) {
      states.push_back(vec_strs(tr.s));
      actions.push_back(vec_strs(tr.a));
    }
    states.push_back(vec_strs(e.transitions.back().s_next));
    json line{{"success", e.success}, {"states", states}, {"actions", actions}};
    os << line.dump() << "\n";
  }
  if (!os) throw ValidationError("demo file write failed: " + path);
}

DemoSet load_demos(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open demo file: " + path);
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> bool {
    ++lineno;
    return static_cast<bool>(std::getline(is, line));
  };
  auto parse_fail = [&](const std::string& what) {
    throw ParseError(path + ":" + std::to_string(lineno) + ": " + what);
  };

  if (!next_line()) parse_fail("missing header line");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
  DemoSet demos;
  std::size_t n_episodes = 0, n_transitions = 0;
  try {
    demos.spec_name = header.at("spec_name").get<std::string>();
    demos.seed = std::strtoull(header.at("seed").get<std::string>().c_str(), nullptr, 10);
    demos.replication_factor = header.at("replication_factor").get<int>();
    n_episodes = header.at("n_episodes").get<std::size_t>();
    n_transitions = header.at("n_transitions").get<std::size_t>();
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }

  for (std::size_t k = 0; k < n_episodes; ++k) {
    if (!next_line()) parse_fail("truncated: expected " + std::to_string(n_episodes) + " episodes");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      parse_fail(e.what());
    }
    Episode ep;
    try {
      ep.success = j.at("success").get<bool>();
      const auto& states = j.at("states");
      const auto& actions = j.at("actions");
      if (states.size() != actions.size() + 1 || actions.empty())
        parse_fail("episode state/action count mismatch");
      std::vector<std::vector<double>> s;
      for (const auto& row : states) s.push_back(strs_vec(row));
      for (std::size_t t = 0; t < actions.size(); ++t)
        ep.transitions.push_back({s[t], strs_vec(actions[t]), s[t + 1]});
    } catch (const json::exception& e) {
      parse_fail(e.what());
    }
    demos.episodes.push_back(std::move(ep));
  }
  if (demos.total_transitions() != n_transitions)
    throw ParseError(path + ": transition count does not match header");
  if (next_line() && !line.empty()) throw ParseError(path + ": trailing content");
  return demos;
}

DemoSet load_demos_for(const std::string& path, const EnvSpec& spec) {
  DemoSet demos = load_demos(path);
  if (demos.spec_name != spec.name)
    throw ValidationError("demo file is for '" + demos.spec_name +
                          "', requested environment '" + spec.name + "'");
  for (const auto& e : demos.episodes) {
    if (!e.success) throw ValidationError("demo episode not marked successful");
    for (const auto& tr : e.transitions) {
      if (static_cast<int>(tr.s.size()) != spec.state_dim ||
          static_cast<int>(tr.a.size()) != spec.action_dim)
        throw ValidationError("demo dimensions do not match environment");
    }
    if (!is_success(spec, e.transitions.back().s_next))
      throw ValidationError("demo final state does not satisfy the goal");
  }
  return demos;
}

}  // namespace bmil
