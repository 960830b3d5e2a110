#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bmil/demgen.hpp"
#include "bmil/envsim.hpp"

using namespace bmil;
namespace fs = std::filesystem;

TEST_CASE("expert_action") {
  const EnvSpec spec = spec_by_name("point-umaze");
  SUBCASE("pd law before clipping") {
    // p = w - (1, 0), v = 0: the pull is along +x and saturates at the bound.
    const std::vector<double> w{0.9, 0.2};
    const auto a = expert_action(spec, std::vector<double>{-0.1, 0.2, 0.0, 0.0}, {w});
    CHECK(a[0] == spec.action_bounds.hi[0]);
    CHECK(a[1] == doctest::Approx(0.0));
  }
  SUBCASE("at a waypoint with zero velocity the controller targets the next one") {
    const std::vector<std::vector<double>> wps{{0.5, 0.2}, {0.5, 0.8}};
    const auto a = expert_action(spec, std::vector<double>{0.5, 0.2, 0.0, 0.0}, wps);
    CHECK(a[0] == doctest::Approx(0.0));
    CHECK(a[1] > 0.0);  // pulled toward the second waypoint
  }
  SUBCASE("velocity damping opposes motion") {
    const std::vector<std::vector<double>> wps{{0.5, 0.2}};
    const auto slow = expert_action(spec, std::vector<double>{0.49, 0.2, 0.0, 0.0}, wps);
    const auto fast = expert_action(spec, std::vector<double>{0.49, 0.2, 1.0, 0.0}, wps);
    CHECK(fast[0] < slow[0]);
  }
}

TEST_CASE("expert reaches the goal on every builtin spec") {
  for (const auto& spec : builtin_specs()) {
    const Episode ep = run_expert(spec, spec.init_state);
    CHECK(ep.success);
    CHECK(static_cast<int>(ep.transitions.size()) <= spec.horizon);
    CHECK(is_success(spec, ep.transitions.back().s_next));
  }
}

TEST_CASE("generate_demos") {
  const EnvSpec spec = spec_by_name("point-umaze");
  SUBCASE("collapsed init region starts exactly at s0") {
    EnvSpec tight = spec;
    tight.init_region = {{spec.init_state[0], spec.init_state[1]},
                         {spec.init_state[0], spec.init_state[1]}};
    const DemoSet demos = generate_demos(tight, 1, 9);
    CHECK(demos.episodes.size() == 1);
    CHECK(demos.episodes[0].transitions[0].s == tight.init_state);
  }
  SUBCASE("deterministic given the seed") {
    const DemoSet a = generate_demos(spec, 3, 123);
    const DemoSet b = generate_demos(spec, 3, 123);
    REQUIRE(a.episodes.size() == b.episodes.size());
    for (std::size_t e = 0; e < a.episodes.size(); ++e) {
      REQUIRE(a.episodes[e].transitions.size() == b.episodes[e].transitions.size());
      for (std::size_t t = 0; t < a.episodes[e].transitions.size(); ++t) {
        CHECK(a.episodes[e].transitions[t].s == b.episodes[e].transitions[t].s);
        CHECK(a.episodes[e].transitions[t].a == b.episodes[e].transitions[t].a);
      }
    }
  }
  SUBCASE("twenty successful episodes, chained transitions") {
    const DemoSet demos = generate_demos(spec, 20, 7);
    CHECK(demos.episodes.size() == 20);
    for (const auto& ep : demos.episodes) {
      CHECK(ep.success);
      for (std::size_t t = 0; t + 1 < ep.transitions.size(); ++t)
        CHECK(ep.transitions[t].s_next == ep.transitions[t + 1].s);
    }
  }
  SUBCASE("episodes replay bitwise through env_step") {
    for (const auto& env : builtin_specs()) {
      const DemoSet demos = generate_demos(env, 2, 5);
      for (const auto& ep : demos.episodes) {
        std::vector<double> state = ep.transitions[0].s;
        for (const auto& tr : ep.transitions) {
          const auto r = env_step(env, state, tr.a);
          CHECK(r.state == tr.s_next);
          state = r.state;
        }
        CHECK(is_success(env, state));
      }
    }
  }
  SUBCASE("n_demos must be positive") {
    CHECK_THROWS_AS(generate_demos(spec, 0, 1), ContractError);
  }
}

TEST_CASE("replicate_demos") {
  const EnvSpec spec = spec_by_name("push-box");
  const DemoSet demos = generate_demos(spec, 5, 11);
  SUBCASE("k = 1 is the identity") {
    const DemoSet r = replicate_demos(demos, 1);
    CHECK(r.episodes.size() == demos.episodes.size());
    CHECK(r.replication_factor == 1);
    CHECK(r.total_transitions() == demos.total_transitions());
  }
  SUBCASE("k = 10 on 5 episodes gives 50 bitwise copies") {
    const DemoSet r = replicate_demos(demos, 10);
    CHECK(r.episodes.size() == 50);
    CHECK(r.replication_factor == 10);
    CHECK(r.total_transitions() == 10 * demos.total_transitions());
    for (std::size_t i = 0; i < r.episodes.size(); ++i) {
      const auto& src = demos.episodes[i % 5];
      REQUIRE(r.episodes[i].transitions.size() == src.transitions.size());
      for (std::size_t t = 0; t < src.transitions.size(); ++t) {
        CHECK(r.episodes[i].transitions[t].s == src.transitions[t].s);
        CHECK(r.episodes[i].transitions[t].a == src.transitions[t].a);
        CHECK(r.episodes[i].transitions[t].s_next == src.transitions[t].s_next);
      }
    }
  }
  SUBCASE("k must be >= 1") { CHECK_THROWS_AS(replicate_demos(demos, 0), ContractError); }
}

TEST_CASE("demo persistence") {
  const EnvSpec spec = spec_by_name("point-rooms");
  const DemoSet demos = generate_demos(spec, 3, 99);
  const std::string path = (fs::temp_directory_path() / "bmil_demos_test.jsonl").string();

  SUBCASE("save then load round trips exactly") {
    save_demos(demos, path);
    const DemoSet back = load_demos(path);
    CHECK(back.spec_name == demos.spec_name);
    CHECK(back.seed == demos.seed);
    CHECK(back.replication_factor == demos.replication_factor);
    REQUIRE(back.episodes.size() == demos.episodes.size());
    for (std::size_t e = 0; e < demos.episodes.size(); ++e)
      for (std::size_t t = 0; t < demos.episodes[e].transitions.size(); ++t) {
        CHECK(back.episodes[e].transitions[t].s == demos.episodes[e].transitions[t].s);
        CHECK(back.episodes[e].transitions[t].a == demos.episodes[e].transitions[t].a);
        CHECK(back.episodes[e].transitions[t].s_next ==
              demos.episodes[e].transitions[t].s_next);
      }

    // Re-saving the loaded set reproduces the file bytes.
    const std::string path2 = path + ".2";
    save_demos(back, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
    fs::remove(path2);
  }

  SUBCASE("truncated file is a parse error, not a partial dataset") {
    save_demos(demos, path);
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    is.close();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << bytes.substr(0, bytes.size() / 2);
    os.close();
    CHECK_THROWS_AS(load_demos(path), ParseError);
  }

  SUBCASE("spec_name mismatch is a validation error") {
    save_demos(demos, path);
    CHECK_THROWS_AS(load_demos_for(path, spec_by_name("point-umaze")), ValidationError);
    CHECK_NOTHROW(load_demos_for(path, spec));
  }

  SUBCASE("malformed json line reports the line number") {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << R"({"spec_name":"x","seed":"1","replication_factor":1,"n_episodes":1,"n_transitions":1})"
       << "\n{ not json\n";
    os.close();
    try {
      load_demos(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  fs::remove(path);
}

TEST_CASE("flatten and all_states counts") {
  const EnvSpec spec = spec_by_name("push-box");
  const DemoSet demos = generate_demos(spec, 4, 2);
  const auto table = flatten(demos);
  CHECK(table.states.n == static_cast<int>(demos.total_transitions()));
  CHECK(table.states.dim == spec.state_dim);
  CHECK(table.actions.dim == spec.action_dim);
  const Batch anchors = all_states(demos);
  CHECK(anchors.n == static_cast<int>(demos.total_transitions() + demos.episodes.size()));
}
