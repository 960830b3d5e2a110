#include <doctest.h>

#include <cmath>

#include "bmil/envsim.hpp"
#include "bmil/rng.hpp"

using namespace bmil;

namespace {

// Random collision-free state inside the eval region.
std::vector<double> random_state(const EnvSpec& spec, Rng& rng) {
  for (;;) {
    std::vector<double> pos{rng.uniform(spec.eval_region.lo[0], spec.eval_region.hi[0]),
                            rng.uniform(spec.eval_region.lo[1], spec.eval_region.hi[1])};
    if (in_any_wall(spec, pos[0], pos[1])) continue;
    std::vector<double> vel{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return state_at(spec, pos, spec.task == Task::maze ? std::span<const double>(vel)
                                                       : std::span<const double>());
  }
}

std::vector<double> random_action(const EnvSpec& spec, Rng& rng) {
  std::vector<double> a(spec.action_dim);
  for (int i = 0; i < spec.action_dim; ++i)
    a[i] = rng.uniform(spec.action_bounds.lo[i], spec.action_bounds.hi[i]);
  return a;
}

}  // namespace

TEST_CASE("builtin specs validate and carry the fixed constants") {
  const auto specs = builtin_specs();
  CHECK(specs.size() == 4);
  for (const auto& s : specs) CHECK_NOTHROW(validate_spec(s));

  const EnvSpec push = spec_by_name("push-box");
  CHECK(push.horizon == 50);
  for (const char* name : {"point-umaze", "point-rooms", "point-corridor"})
    CHECK(spec_by_name(name).dt == 0.02);
  CHECK(spec_by_name("point-umaze").horizon == 150);
  CHECK(spec_by_name("point-rooms").horizon == 200);
  CHECK(spec_by_name("point-corridor").horizon == 250);
  CHECK_THROWS_AS(spec_by_name("nope"), ValidationError);
}

TEST_CASE("env_reset") {
  const EnvSpec spec = spec_by_name("point-umaze");
  SUBCASE("default reset returns s0 exactly") {
    CHECK(env_reset(spec) == spec.init_state);
  }
  SUBCASE("override equal to s0 behaves like the default reset") {
    const auto a = env_reset(spec);
    const auto b = env_reset(spec, spec.init_state);
    CHECK(a == b);
    const std::vector<double> act{0.5, -0.25};
    CHECK(env_step(spec, a, act).state == env_step(spec, b, act).state);
  }
  SUBCASE("override inside a wall is rejected") {
    std::vector<double> inside{0.2, 0.5, 0.0, 0.0};  // inside the U bar
    CHECK(in_any_wall(spec, inside[0], inside[1]));
    CHECK_THROWS_AS(env_reset(spec, inside), ValidationError);
  }
  SUBCASE("override outside the eval region is rejected") {
    std::vector<double> outside{-0.5, 0.5, 0.0, 0.0};
    CHECK_THROWS_AS(env_reset(spec, outside), ValidationError);
  }
  SUBCASE("push override recomputes relative coordinates") {
    const EnvSpec push = spec_by_name("push-box");
    std::vector<double> s = push.init_state;
    s[0] = 0.6;
    s[1] = 0.7;
    s[4] = 99.0;  // stale
    const auto r = env_reset(push, s);
    CHECK(r[4] == doctest::Approx(r[2] - r[0]));
    CHECK(r[5] == doctest::Approx(r[3] - r[1]));
  }
}

TEST_CASE("env_step maze dynamics") {
  EnvSpec spec = spec_by_name("point-umaze");
  SUBCASE("zero action from rest stays put") {
    const std::vector<double> s{0.5, 0.9, 0.0, 0.0};
    const auto r = env_step(spec, s, std::vector<double>{0.0, 0.0});
    CHECK(r.state == s);
  }
  SUBCASE("hand-worked free-space integration") {
    // v' = v + a*dt, p' = p + v'*dt
    const std::vector<double> s{0.5, 0.9, 0.0, 0.0};
    const auto r = env_step(spec, s, std::vector<double>{1.0, 0.0});
    CHECK(r.state[2] == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(r.state[0] == doctest::Approx(0.5 + 0.0004).epsilon(1e-13));
    CHECK(r.state[1] == 0.9);
    CHECK(r.state[3] == 0.0);
  }
  SUBCASE("driving into a wall face clamps position and zeroes velocity") {
    // Straight down into the bottom perimeter wall (face at y = 0).
    std::vector<double> s{0.5, 0.005, 0.0, -1.0};
    const auto r = env_step(spec, s, std::vector<double>{0.0, 0.0});
    CHECK(r.state[1] == 0.0);
    CHECK(r.state[3] == 0.0);
    CHECK(!in_any_wall(spec, r.state[0], r.state[1]));
  }
  SUBCASE("determinism: same input, bitwise-same output") {
    Rng rng(17);
    for (int i = 0; i < 10000; ++i) {
      const auto s = random_state(spec, rng);
      const auto a = random_action(spec, rng);
      const auto r1 = env_step(spec, s, a);
      const auto r2 = env_step(spec, s, a);
      CHECK(r1.state == r2.state);
      CHECK(r1.success == r2.success);
    }
  }
  SUBCASE("containment: next position never lies strictly inside a wall") {
    Rng rng(23);
    for (const auto& env : builtin_specs()) {
      for (int i = 0; i < 25000; ++i) {
        const auto s = random_state(env, rng);
        const auto r = env_step(env, s, random_action(env, rng));
        CHECK(!in_any_wall(env, r.state[0], r.state[1]));
      }
    }
  }
  SUBCASE("action clipped to bounds before dynamics") {
    const std::vector<double> s{0.5, 0.9, 0.0, 0.0};
    const auto big = env_step(spec, s, std::vector<double>{1e9, 0.0});
    const auto capped = env_step(spec, s, std::vector<double>{spec.action_bounds.hi[0], 0.0});
    CHECK(big.state == capped.state);
  }
  SUBCASE("non-finite state is a contract violation") {
    std::vector<double> s{0.5, 0.9, 0.0, std::nan("")};
    CHECK_THROWS_AS(env_step(spec, s, std::vector<double>{0, 0}), ContractError);
  }
}

TEST_CASE("env_step push dynamics") {
  const EnvSpec spec = spec_by_name("push-box");
  SUBCASE("gripper integrates directly from the action") {
    const auto s = spec.init_state;
    const auto r = env_step(spec, s, std::vector<double>{1.0, 0.0});
    CHECK(r.state[0] == doctest::Approx(s[0] + 0.02));
    CHECK(r.state[1] == s[1]);
    CHECK(r.state[2] == s[2]);  // no contact yet
  }
  SUBCASE("contact pushes the object out to the contact radius") {
    std::vector<double> s = spec.init_state;
    s[0] = s[2] - spec.contact_radius - 0.005;  // just behind the object
    s[4] = s[2] - s[0];
    s[5] = 0.0;
    const auto r = env_step(spec, s, std::vector<double>{1.0, 0.0});
    const double d = std::hypot(r.state[2] - r.state[0], r.state[3] - r.state[1]);
    CHECK(d == doctest::Approx(spec.contact_radius).epsilon(1e-12));
    CHECK(r.state[2] > s[2]);  // object moved toward the goal side
    CHECK(r.state[4] == doctest::Approx(r.state[2] - r.state[0]));
  }
}

TEST_CASE("is_success") {
  const EnvSpec maze = spec_by_name("point-umaze");
  SUBCASE("exactly at the goal center") {
    const auto s = state_at(maze, maze.goal);
    CHECK(is_success(maze, s));
  }
  SUBCASE("strict boundary: goal_radius + 1e-9 fails") {
    std::vector<double> pos{maze.goal[0] + maze.goal_radius + 1e-9, maze.goal[1]};
    CHECK(!is_success(maze, state_at(maze, pos)));
    std::vector<double> inside{maze.goal[0] + maze.goal_radius - 1e-9, maze.goal[1]};
    CHECK(is_success(maze, state_at(maze, inside)));
  }
  SUBCASE("agrees with an independent distance computation") {
    Rng rng(31);
    for (const auto& spec : builtin_specs()) {
      for (int i = 0; i < 2500; ++i) {
        const auto s = random_state(spec, rng);
        const int off = spec.task == Task::push ? 2 : 0;
        const double dx = s[off] - spec.goal[0];
        const double dy = s[off + 1] - spec.goal[1];
        const bool expect = std::sqrt(dx * dx + dy * dy) < spec.goal_radius;
        CHECK(is_success(spec, s) == expect);
      }
    }
  }
}

TEST_CASE("maze steps are reversible at desk scale") {
  // For collision-free steps s -> s', some action from the reversed state at
  // s' leads back near s's position.
  Rng rng(41);
  const EnvSpec spec = spec_by_name("point-umaze");
  const double tol = 2.0 * spec.dt * spec.speed_max;
  int tested = 0;
  while (tested < 1000) {
    const auto s = random_state(spec, rng);
    const auto a = random_action(spec, rng);
    const auto r = env_step(spec, s, a);
    // Skip contact steps; reversibility is claimed for free-space motion.
    if (r.state[2] == 0.0 || r.state[3] == 0.0) continue;
    std::vector<double> rev{r.state[0], r.state[1], -r.state[2], -r.state[3]};
    double best = 1e9;
    for (int i = 0; i <= 20; ++i) {
      for (int j = 0; j <= 20; ++j) {
        std::vector<double> back{spec.action_bounds.lo[0] +
                                     (spec.action_bounds.hi[0] - spec.action_bounds.lo[0]) * i / 20.0,
                                 spec.action_bounds.lo[1] +
                                     (spec.action_bounds.hi[1] - spec.action_bounds.lo[1]) * j / 20.0};
        const auto rr = env_step(spec, rev, back);
        best = std::min(best, std::hypot(rr.state[0] - s[0], rr.state[1] - s[1]));
      }
    }
    CHECK(best <= tol);
    ++tested;
  }
}

TEST_CASE("spec json round trip") {
  for (const auto& spec : builtin_specs()) {
    const std::string text = spec_to_json(spec);
    const EnvSpec back = spec_from_json(text);
    CHECK(back.name == spec.name);
    CHECK(back.init_state == spec.init_state);
    CHECK(back.walls.size() == spec.walls.size());
    CHECK(back.goal == spec.goal);
    CHECK(spec_to_json(back) == text);
  }
  SUBCASE("unknown fields are rejected") {
    std::string text = spec_to_json(spec_by_name("point-umaze"));
    text.insert(text.find_first_of('{') + 1, "\"bogus\": 1,");
    CHECK_THROWS_AS(spec_from_json(text), ParseError);
  }
  SUBCASE("invalid geometry is rejected") {
    std::string text = spec_to_json(spec_by_name("point-umaze"));
    // goal_radius 0 violates the spec invariants
    const auto pos = text.find("\"goal_radius\"");
    REQUIRE(pos != std::string::npos);
    const auto colon = text.find(':', pos);
    const auto comma = text.find_first_of(",\n", colon);
    text.replace(colon + 1, comma - colon - 1, " 0.0");
    CHECK_THROWS_AS(spec_from_json(text), ValidationError);
  }
}
