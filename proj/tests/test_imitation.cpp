#include <doctest.h>

#include <cmath>

#include "bmil/demgen.hpp"
#include "bmil/envsim.hpp"
#include "bmil/evalharness.hpp"
#include "bmil/imitation.hpp"

using namespace bmil;

namespace {

constexpr double kLn2Pi = 1.8378770664093454835606594728112;

Policy zero_policy(const EnvSpec& spec) {
  Policy p;
  p.net.layer_dims = {spec.state_dim, 2 * spec.action_dim};
  p.net.weights = {std::vector<double>(
      static_cast<std::size_t>(2 * spec.action_dim) * spec.state_dim, 0.0)};
  p.net.biases = {std::vector<double>(2 * spec.action_dim, 0.0)};
  p.state_norm = Normalizer::identity(spec.state_dim);
  p.action_norm = Normalizer::identity(spec.action_dim);
  p.action_bounds = spec.action_bounds;
  p.adam = make_adam(p.net);
  return p;
}

bool same_params(const NetParams& a, const NetParams& b) {
  return a.layer_dims == b.layer_dims && a.weights == b.weights && a.biases == b.biases;
}

}  // namespace

TEST_CASE("policy_act") {
  const EnvSpec spec = spec_by_name("point-umaze");
  SUBCASE("zero network gives the zero action") {
    const Policy p = zero_policy(spec);
    const auto a = policy_act(p, spec.init_state);
    CHECK(a == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("deterministic") {
    const DemoSet demos = generate_demos(spec, 2, 3);
    Rng rng(5);
    const Policy p = make_policy(spec, demos, rng);
    CHECK(policy_act(p, spec.init_state) == policy_act(p, spec.init_state));
  }
  SUBCASE("mean outside the action bounds lands on the bound") {
    Policy p = zero_policy(spec);
    p.net.biases[0][0] = 100.0;
    p.net.biases[0][1] = -100.0;
    const auto a = policy_act(p, spec.init_state);
    CHECK(a[0] == spec.action_bounds.hi[0]);
    CHECK(a[1] == spec.action_bounds.lo[1]);
  }
}

TEST_CASE("bc_loss") {
  const EnvSpec spec = spec_by_name("point-umaze");
  SUBCASE("head exactly at the target with sigma 1 gives (d/2) ln 2pi") {
    Policy p = zero_policy(spec);
    p.net.biases[0][0] = 0.4;
    p.net.biases[0][1] = -0.8;
    Batch s(5, 4), a(5, 2);
    Rng rng(2);
    for (auto& v : s.data) v = rng.uniform(-1, 1);
    for (int i = 0; i < 5; ++i) {
      a.row(i)[0] = 0.4;
      a.row(i)[1] = -0.8;
    }
    CHECK(bc_loss(p, s, a) == doctest::Approx(kLn2Pi).epsilon(1e-12));
  }
  SUBCASE("duplicated batch has identical loss") {
    const DemoSet demos = generate_demos(spec, 2, 3);
    Rng rng(5);
    const Policy p = make_policy(spec, demos, rng);
    const auto table = flatten(demos);
    Batch s(8, 4), a(8, 2), s2(16, 4), a2(16, 2);
    for (int i = 0; i < 8; ++i) {
      std::copy(table.states.row(i), table.states.row(i) + 4, s.row(i));
      std::copy(table.actions.row(i), table.actions.row(i) + 2, a.row(i));
    }
    for (int i = 0; i < 16; ++i) {
      std::copy(s.row(i % 8), s.row(i % 8) + 4, s2.row(i));
      std::copy(a.row(i % 8), a.row(i % 8) + 2, a2.row(i));
    }
    CHECK(bc_loss(p, s, a) == doctest::Approx(bc_loss(p, s2, a2)).epsilon(1e-13));
  }
  SUBCASE("matches independent per-sample NLL summation") {
    Policy p = zero_policy(spec);
    Rng rng(6);
    for (auto& w : p.net.weights)
      for (auto& v : w) v = 0.1 * rng.normal();
    Batch s(7, 4), a(7, 2);
    for (auto& v : s.data) v = rng.uniform(-1, 1);
    for (auto& v : a.data) v = rng.uniform(-1, 1);
    double total = 0.0;
    for (int i = 0; i < 7; ++i) {
      const std::vector<double> si(s.row(i), s.row(i) + 4);
      const std::vector<double> ai(a.row(i), a.row(i) + 2);
      total += gaussian_nll(net_forward(p.net, si), ai);
    }
    CHECK(bc_loss(p, s, a) == doctest::Approx(total / 7).epsilon(1e-12));
  }
}

TEST_CASE("mixed_batch composition is exact") {
  TransitionTable demos;
  demos.states = Batch(40, 2);
  demos.actions = Batch(40, 1);
  for (int i = 0; i < 40; ++i) {
    demos.states.row(i)[0] = 1.0;  // demo marker
    demos.actions.row(i)[0] = 1.0;
  }
  TraceBuffer traces;
  traces.states = Batch(25, 2);
  traces.actions = Batch(25, 1);
  for (int i = 0; i < 25; ++i) {
    traces.states.row(i)[0] = -1.0;  // trace marker
    traces.actions.row(i)[0] = -1.0;
  }
  auto count_demo = [](const MixedBatch& mb) {
    int n = 0;
    for (int i = 0; i < mb.states.n; ++i) n += mb.states.row(i)[0] > 0 ? 1 : 0;
    return n;
  };

  Rng rng(3);
  SUBCASE("p_d = 1 draws only demos") {
    const auto mb = mixed_batch(demos, TraceBuffer{}, 1.0, 32, rng);
    CHECK(mb.states.n == 32);
    CHECK(count_demo(mb) == 32);
  }
  SUBCASE("B=64, p_d=0.5 gives exactly 32 + 32") {
    const auto mb = mixed_batch(demos, traces, 0.5, 64, rng);
    CHECK(count_demo(mb) == 32);
  }
  SUBCASE("B=256, p_d=0.95 gives exactly 243 + 13") {
    const auto mb = mixed_batch(demos, traces, 0.95, 256, rng);
    CHECK(mb.states.n == 256);
    CHECK(count_demo(mb) == 243);
  }
  SUBCASE("empty trace buffer with p_d < 1 is a configuration error") {
    CHECK_THROWS_AS(mixed_batch(demos, TraceBuffer{}, 0.5, 16, rng), ConfigError);
  }
  SUBCASE("p_d = 0 draws only traces") {
    const auto mb = mixed_batch(demos, traces, 0.0, 16, rng);
    CHECK(count_demo(mb) == 0);
  }
}

TEST_CASE("train") {
  const EnvSpec spec = spec_by_name("point-umaze");
  const DemoSet demos = generate_demos(spec, 3, 17);

  SUBCASE("bc equals bmil at p_d=1 with zero model steps, bitwise") {
    TrainConfig bc;
    bc.env = spec.name;
    bc.mode = Mode::bc;
    bc.n_epochs = 3;
    bc.policy_steps_per_epoch = 5;
    bc.batch_size = 32;
    bc.seed = 4;

    TrainConfig bmil = bc;
    bmil.mode = Mode::bmil;
    bmil.p_d = 1.0;
    bmil.model_steps_per_epoch = 0;

    const TrainResult a = train(bc, spec, demos);
    const TrainResult b = train(bmil, spec, demos);
    CHECK(same_params(a.policy.net, b.policy.net));
  }

  SUBCASE("N = 0 returns an untrained policy and an empty log") {
    TrainConfig cfg;
    cfg.env = spec.name;
    cfg.mode = Mode::bc;
    cfg.n_epochs = 0;
    cfg.policy_steps_per_epoch = 5;
    cfg.batch_size = 16;
    cfg.seed = 12;
    const TrainResult r = train(cfg, spec, demos);
    CHECK(r.log.empty());
    CHECK(r.policy_grad_steps == 0);
    Rng init = Rng::stream(12, "policy_init");
    const Policy fresh = make_policy(spec, demos, init);
    CHECK(same_params(r.policy.net, fresh.net));
  }

  SUBCASE("total policy gradient steps are N*M") {
    TrainConfig cfg;
    cfg.env = spec.name;
    cfg.mode = Mode::bc;
    cfg.n_epochs = 3;
    cfg.policy_steps_per_epoch = 7;
    cfg.batch_size = 16;
    cfg.seed = 2;
    const TrainResult r = train(cfg, spec, demos);
    CHECK(r.policy_grad_steps == 21);
    CHECK(r.log.size() == 3);
  }

  SUBCASE("training is deterministic across repeated runs") {
    TrainConfig cfg;
    cfg.env = spec.name;
    cfg.mode = Mode::bmil;
    cfg.n_epochs = 2;
    cfg.policy_steps_per_epoch = 4;
    cfg.batch_size = 32;
    cfg.p_d = 0.8;
    cfg.k_traces = 1;
    cfg.schedule = {1, 2, 1, 3};
    cfg.strategy = PerturbStrategy::resample(0.3);
    cfg.model_steps_per_epoch = 3;
    cfg.model_batch_size = 16;
    cfg.seed = 31;
    const TrainResult a = train(cfg, spec, demos);
    const TrainResult b = train(cfg, spec, demos);
    CHECK(same_params(a.policy.net, b.policy.net));
    REQUIRE(a.backwards.has_value());
    CHECK(same_params(a.backwards->action_net, b.backwards->action_net));
    CHECK(same_params(a.backwards->state_net, b.backwards->state_net));
    // Log rows carry the trace bookkeeping.
    CHECK(a.log[0].horizon == 1);
    CHECK(a.log[0].trace_pairs == static_cast<int>(demos.total_states()));
  }

  SUBCASE("mismatched demo set is rejected") {
    TrainConfig cfg;
    cfg.env = "push-box";
    cfg.mode = Mode::bc;
    cfg.n_epochs = 1;
    cfg.policy_steps_per_epoch = 1;
    cfg.batch_size = 8;
    CHECK_THROWS_AS(train(cfg, spec_by_name("push-box"), demos), ValidationError);
  }
}

TEST_CASE("compute_budget_variant") {
  TrainConfig cfg = preset_config("push-box", Mode::bc);
  SUBCASE("multiplier 1 changes nothing") {
    const TrainConfig c = compute_budget_variant(cfg, 1);
    CHECK(c.policy_steps_per_epoch == cfg.policy_steps_per_epoch);
  }
  SUBCASE("multiplier 20 scales M") {
    TrainConfig base = cfg;
    base.policy_steps_per_epoch = 100;
    const TrainConfig c = compute_budget_variant(base, 20);
    CHECK(c.policy_steps_per_epoch == 2000);
    CHECK(c.n_epochs == base.n_epochs);
  }
  SUBCASE("5x budget matches the bmil preset's total gradient count within 10%") {
    const TrainConfig bmil = preset_config("push-box", Mode::bmil);
    const TrainConfig bc5 = compute_budget_variant(preset_config("push-box", Mode::bc), 5);
    const long bmil_total =
        static_cast<long>(bmil.n_epochs) *
        (bmil.policy_steps_per_epoch + bmil.model_steps_per_epoch);
    const long bc5_total = static_cast<long>(bc5.n_epochs) * bc5.policy_steps_per_epoch;
    CHECK(std::abs(static_cast<double>(bc5_total - bmil_total)) / bmil_total < 0.1);
  }
  SUBCASE("multiplier below 1 is rejected") {
    CHECK_THROWS_AS(compute_budget_variant(cfg, 0), ConfigError);
  }
}

TEST_CASE("preset_config carries the documented values") {
  const TrainConfig push = preset_config("push-box", Mode::bmil);
  CHECK(push.p_d == 0.5);
  CHECK(push.batch_size == 64);
  const TrainConfig umaze = preset_config("point-umaze", Mode::bmil);
  CHECK(umaze.p_d == 0.8);
  CHECK(umaze.batch_size == 256);
  CHECK_THROWS_AS(preset_config("unknown-env", Mode::bc), ValidationError);
}

TEST_CASE("reduced-budget bc solves point-umaze from the training start") {
  const EnvSpec spec = spec_by_name("point-umaze");
  const DemoSet demos = generate_demos(spec, 10, 3);
  TrainConfig cfg;
  cfg.env = spec.name;
  cfg.mode = Mode::bc;
  cfg.n_epochs = 20;
  cfg.policy_steps_per_epoch = 60;
  cfg.batch_size = 64;
  cfg.seed = 5;
  const TrainResult r = train(cfg, spec, demos);
  const auto res = rollout(r.policy, spec, spec.init_state);
  CHECK(res.success);
}
