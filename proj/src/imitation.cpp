#include "bmil/imitation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bmil/fwdmodel.hpp"

namespace bmil {

namespace {

constexpr int kPolicyHidden = 256;
constexpr int kPolicyLayers = 3;

double policy_step(Policy& pol, const MixedBatch& mb, NetParams& grad) {
  Batch ns = mb.states;
  Batch na = mb.actions;
  pol.state_norm.apply_rows(ns);
  pol.action_norm.apply_rows(na);
  const double loss = grad_nll(pol.net, ns, na, grad);
  adam_step(pol.net, grad, pol.adam);
  return loss;
}

void validate_config(const TrainConfig& cfg, const EnvSpec& spec, const DemoSet& demos) {
  if (demos.spec_name != spec.name)
    throw ValidationError("demo set is for '" + demos.spec_name +
                          "', training on '" + spec.name + "'");
  if (demos.episodes.empty()) throw ValidationError("empty demo set");
  if (cfg.n_epochs < 0) throw ConfigError("n_epochs must be >= 0");
  if (cfg.policy_steps_per_epoch <= 0) throw ConfigError("policy_steps_per_epoch must be positive");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (cfg.p_d < 0.0 || cfg.p_d > 1.0) throw ConfigError("p_d must lie in [0, 1]");
  if (cfg.k_traces < 1) throw ConfigError("k_traces must be >= 1");
  if (cfg.model_steps_per_epoch < 0) throw ConfigError("model_steps_per_epoch must be >= 0");
  if (cfg.model_batch_size <= 0) throw ConfigError("model_batch_size must be positive");
}

}  // namespace

Mode mode_from_string(const std::string& s) {
  if (s == "bc") return Mode::bc;
  if (s == "bmil") return Mode::bmil;
  if (s == "bmil-model-first") return Mode::bmil_model_first;
  if (s == "fmil") return Mode::fmil;
  throw ConfigError("unknown mode: " + s);
}

std::string mode_to_string(Mode m) {
  switch (m) {
    case Mode::bc: return "bc";
    case Mode::bmil: return "bmil";
    case Mode::bmil_model_first: return "bmil-model-first";
    case Mode::fmil: return "fmil";
  }
  return "?";
}

TrainConfig preset_config(const std::string& env_name, Mode mode) {
  TrainConfig c;
  c.env = env_name;
  c.mode = mode;
  if (env_name == "push-box") {
    c.n_epochs = 50;
    c.policy_steps_per_epoch = 20;
    c.batch_size = 64;
    c.p_d = 0.5;
    c.k_traces = 1;
    c.schedule = {1, 1, 1, 2};  // single-step traces throughout
    c.strategy = PerturbStrategy::scale(30.0);
    c.model_steps_per_epoch = 80;
    c.model_batch_size = 64;
  } else if (env_name == "point-umaze") {
    c.n_epochs = 50;
    c.policy_steps_per_epoch = 60;
    c.batch_size = 256;
    c.p_d = 0.8;
    c.k_traces = 1;
    c.schedule = {1, 8, 10, 40};
    c.strategy = PerturbStrategy::scale(40.0);
    c.model_steps_per_epoch = 60;
    c.model_batch_size = 64;
  } else if (env_name == "point-rooms" || env_name == "point-corridor") {
    c.n_epochs = 60;
    c.policy_steps_per_epoch = 60;
    c.batch_size = 256;
    c.p_d = 0.8;
    c.k_traces = 1;
    c.schedule = {1, 8, 12, 48};
    c.strategy = PerturbStrategy::scale(1.0);
    c.model_steps_per_epoch = 60;
    c.model_batch_size = 64;
  } else {
    throw ValidationError("no training preset for environment: " + env_name);
  }
  return c;
}

TrainConfig compute_budget_variant(const TrainConfig& config, int multiplier) {
  if (multiplier < 1) throw ConfigError("budget multiplier must be >= 1");
  TrainConfig c = config;
  c.policy_steps_per_epoch *= multiplier;
  return c;
}

Policy make_policy(const EnvSpec& spec, const DemoSet& demos, Rng& rng) {
  Policy p;
  std::vector<int> dims{spec.state_dim};
  for (int l = 0; l < kPolicyLayers; ++l) dims.push_back(kPolicyHidden);
  dims.push_back(2 * spec.action_dim);
  p.net = make_net(dims, rng);
  p.state_norm = Normalizer::fit(all_states(demos));
  p.action_norm = Normalizer::fit(flatten(demos).actions);
  p.action_bounds = spec.action_bounds;
  p.adam = make_adam(p.net);
  return p;
}

std::vector<double> policy_act(const Policy& policy, std::span<const double> state) {
  const auto ns = policy.state_norm.apply(state);
  const DiagGaussian head = net_forward(policy.net, ns);
  const auto mean = policy.action_norm.invert(head.mean);
  return policy.action_bounds.clip(mean);
}

double bc_loss(const Policy& policy, const Batch& states, const Batch& actions) {
  if (states.n == 0) throw ContractError("bc_loss: empty batch");
  Batch ns = states, na = actions;
  policy.state_norm.apply_rows(ns);
  policy.action_norm.apply_rows(na);
  return nll_loss(policy.net, ns, na);
}

MixedBatch mixed_batch(const TransitionTable& demos, const TraceBuffer& traces,
                       double p_d, int B, Rng& rng) {
  if (B <= 0) throw ContractError("mixed_batch: batch size must be positive");
  if (p_d < 0.0 || p_d > 1.0) throw ContractError("mixed_batch: p_d outside [0, 1]");
  const int n_demo = static_cast<int>(std::lround(p_d * B));
  const int n_trace = B - n_demo;
  if (n_demo > 0 && demos.states.n == 0)
    throw ConfigError("mixed_batch: no demonstration transitions");
  if (n_trace > 0 && traces.size() == 0)
    throw ConfigError("mixed_batch: empty trace buffer with p_d < 1");
  MixedBatch mb;
  mb.states = Batch(B, demos.states.dim);
  mb.actions = Batch(B, demos.actions.dim);
  for (int i = 0; i < n_demo; ++i) {
    const int idx = static_cast<int>(rng.index(demos.states.n));
    std::copy(demos.states.row(idx), demos.states.row(idx) + mb.states.dim, mb.states.row(i));
    std::copy(demos.actions.row(idx), demos.actions.row(idx) + mb.actions.dim, mb.actions.row(i));
  }
  for (int i = n_demo; i < B; ++i) {
    const int idx = static_cast<int>(rng.index(traces.size()));
    std::copy(traces.states.row(idx), traces.states.row(idx) + mb.states.dim, mb.states.row(i));
    std::copy(traces.actions.row(idx), traces.actions.row(idx) + mb.actions.dim, mb.actions.row(i));
  }
  return mb;
}

TrainResult train(const TrainConfig& cfg, const EnvSpec& spec, const DemoSet& demos) {
  validate_config(cfg, spec, demos);
  Rng policy_init = Rng::stream(cfg.seed, "policy_init");
  Rng policy_train = Rng::stream(cfg.seed, "policy_train");
  Rng model_init = Rng::stream(cfg.seed, "model_init");
  Rng model_train = Rng::stream(cfg.seed, "model_train");
  Rng trace_rng = Rng::stream(cfg.seed, "trace");

  TrainResult res;
  res.policy = make_policy(spec, demos, policy_init);
  const TransitionTable table = flatten(demos);

  const bool backwards_mode = cfg.mode == Mode::bmil || cfg.mode == Mode::bmil_model_first;
  if (backwards_mode) res.backwards = make_backwards_model(spec, demos, model_init);
  if (cfg.mode == Mode::fmil)
    res.forward = std::make_shared<ForwardModel>(make_forward_model(spec, demos, model_init));

  double pretrain_loss = 0.0;
  if (cfg.mode == Mode::bmil_model_first && cfg.n_epochs > 0 && cfg.model_steps_per_epoch > 0) {
    const long steps = static_cast<long>(cfg.n_epochs) * cfg.model_steps_per_epoch;
    pretrain_loss = train_backwards(*res.backwards, demos, static_cast<int>(steps),
                                    cfg.model_batch_size, model_train);
    res.model_grad_steps += steps;
  }

  const bool want_traces = cfg.mode != Mode::bc && cfg.p_d < 1.0;
  TraceBuffer traces;
  NetParams grad;
  for (int epoch = 1; epoch <= cfg.n_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double model_loss = 0.0;
    try {
      if (cfg.mode == Mode::bmil && cfg.model_steps_per_epoch > 0) {
        model_loss = train_backwards(*res.backwards, demos, cfg.model_steps_per_epoch,
                                     cfg.model_batch_size, model_train);
        res.model_grad_steps += cfg.model_steps_per_epoch;
      } else if (cfg.mode == Mode::fmil && cfg.model_steps_per_epoch > 0) {
        model_loss = train_forward(*res.forward, demos, cfg.model_steps_per_epoch,
                                   cfg.model_batch_size, model_train);
        res.model_grad_steps += cfg.model_steps_per_epoch;
      } else if (cfg.mode == Mode::bmil_model_first) {
        model_loss = pretrain_loss;
      }

      const int H = cfg.mode == Mode::bc ? 0 : horizon_at(cfg.schedule, epoch);
      int trace_pairs = 0;
      if (want_traces) {
        traces = backwards_mode
                     ? generate_traces(*res.backwards, spec, demos, cfg.k_traces, H,
                                       cfg.strategy, trace_rng)
                     : generate_forward_traces(*res.forward, res.policy, spec, demos,
                                               cfg.k_traces, H, trace_rng);
        traces.generation_epoch = epoch;
        trace_pairs = traces.size();
      }

      double loss_sum = 0.0;
      const double pd_eff = cfg.mode == Mode::bc ? 1.0 : cfg.p_d;
      for (int m = 0; m < cfg.policy_steps_per_epoch; ++m) {
        const MixedBatch mb = mixed_batch(table, traces, pd_eff, cfg.batch_size, policy_train);
        loss_sum += policy_step(res.policy, mb, grad);
      }
      res.policy_grad_steps += cfg.policy_steps_per_epoch;

      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.log.push_back({epoch, model_loss, loss_sum / cfg.policy_steps_per_epoch, H,
                         trace_pairs, secs});
    } catch (const std::runtime_error& e) {
      throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }
  return res;
}

void write_train_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open training log for writing: " + path);
  os << "epoch,model_loss,policy_loss,horizon,trace_pairs,wall_seconds\n";
  char buf[256];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%d,%d,%.3f\n", row.epoch,
                  row.model_loss, row.policy_loss, row.horizon, row.trace_pairs,
                  row.wall_seconds);
    os << buf;
  }
}

void save_policy(const Policy& policy, const std::string& path) {
  save_net(path, policy.net, policy.state_norm, policy.action_norm);
}

Policy load_policy(const std::string& path, const EnvSpec& spec) {
  Policy p;
  load_net(path, p.net, p.state_norm, p.action_norm);
  if (p.net.input_dim() != spec.state_dim || p.net.output_dim() != 2 * spec.action_dim)
    throw ValidationError("checkpoint dimensions do not match environment '" + spec.name + "'");
  p.action_bounds = spec.action_bounds;
  p.adam = make_adam(p.net);
  return p;
}

}  // namespace bmil
