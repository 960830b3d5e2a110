#include "bmil/backmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace bmil {

namespace {

constexpr int kModelHidden = 256;
constexpr int kModelLayers = 4;

std::vector<int> model_dims(int in, int out) {
  std::vector<int> dims{in};
  for (int l = 0; l < kModelLayers; ++l) dims.push_back(kModelHidden);
  dims.push_back(2 * out);
  return dims;
}

// Split one raw output row into a clamped head.
DiagGaussian head_from_raw(const double* row, int d) {
  DiagGaussian g;
  g.mean.assign(row, row + d);
  g.log_std.resize(d);
  for (int j = 0; j < d; ++j)
    g.log_std[j] = std::clamp(row[d + j], kLogStdMin, kLogStdMax);
  return g;
}

bool finite_row(const double* r, int d) {
  for (int j = 0; j < d; ++j)
    if (!std::isfinite(r[j])) return false;
  return true;
}

struct NormalizedTable {
  Batch states;       // normalized s_t
  Batch actions;      // normalized a_t
  Batch next_states;  // normalized s_{t+1}
  Batch action_next;  // (normalized a_t, normalized s_{t+1}) concatenated
};

NormalizedTable normalize_table(const BackwardsModel& model, const TransitionTable& t) {
  NormalizedTable n;
  n.states = t.states;
  n.actions = t.actions;
  n.next_states = t.next_states;
  model.state_norm.apply_rows(n.states);
  model.action_norm.apply_rows(n.actions);
  model.state_norm.apply_rows(n.next_states);
  n.action_next = Batch(t.states.n, n.actions.dim + n.states.dim);
  for (int i = 0; i < t.states.n; ++i) {
    double* r = n.action_next.row(i);
    std::copy(n.actions.row(i), n.actions.row(i) + n.actions.dim, r);
    std::copy(n.next_states.row(i), n.next_states.row(i) + n.states.dim, r + n.actions.dim);
  }
  return n;
}

void gather(const Batch& src, const std::vector<int>& idx, Batch& dst) {
  dst.n = static_cast<int>(idx.size());
  dst.dim = src.dim;
  dst.data.resize(static_cast<std::size_t>(dst.n) * dst.dim);
  for (int i = 0; i < dst.n; ++i)
    std::copy(src.row(idx[i]), src.row(idx[i]) + src.dim, dst.row(i));
}

}  // namespace

PerturbStrategy PerturbStrategy::resample(double b) {
  if (b <= 0.0) throw ContractError("resample strategy needs positive noise bound");
  return {PerturbKind::resample, b};
}

PerturbStrategy PerturbStrategy::scale(double c) {
  if (c <= 0.0) throw ContractError("scale strategy needs positive coefficient");
  return {PerturbKind::scale, c};
}

int horizon_at(const HorizonSchedule& s, int epoch) {
  if (s.x <= 0 || s.y < s.x || s.a >= s.b)
    throw ContractError("horizon schedule requires 0 < x <= y and a < b");
  if (epoch < 1) throw ContractError("horizon_at: epoch must be >= 1");
  const double f = s.x + (static_cast<double>(epoch - s.a) / (s.b - s.a)) * (s.y - s.x);
  const double clamped = std::min(std::max(f, static_cast<double>(s.x)),
                                  static_cast<double>(s.y));
  return static_cast<int>(std::floor(clamped));
}

BackwardsModel make_backwards_model(const EnvSpec& spec, const DemoSet& demos, Rng& rng) {
  BackwardsModel m;
  m.action_net = make_net(model_dims(spec.state_dim, spec.action_dim), rng);
  m.state_net = make_net(model_dims(spec.action_dim + spec.state_dim, spec.state_dim), rng);
  m.state_norm = Normalizer::fit(all_states(demos));
  const auto table = flatten(demos);
  m.action_norm = Normalizer::fit(table.actions);
  m.adam_action = make_adam(m.action_net);
  m.adam_state = make_adam(m.state_net);
  return m;
}

double backwards_loss(const BackwardsModel& model, const TransitionTable& table) {
  const NormalizedTable n = normalize_table(model, table);
  return nll_loss(model.action_net, n.next_states, n.actions) +
         nll_loss(model.state_net, n.action_next, n.states);
}

double train_backwards(BackwardsModel& model, const DemoSet& demos, int steps,
                       int batch_size, Rng& rng) {
  if (steps < 0 || batch_size <= 0)
    throw ContractError("train_backwards: bad steps/batch_size");
  const auto table = flatten(demos);
  if (steps == 0) return backwards_loss(model, table);
  const NormalizedTable n = normalize_table(model, table);
  AdamState& adam_a = model.adam_action;
  AdamState& adam_s = model.adam_state;

  NetParams grad;
  Batch in_a, tgt_a, in_s, tgt_s;
  std::vector<int> idx(batch_size);
  double loss = 0.0;
  for (int step = 0; step < steps; ++step) {
    for (int& i : idx) i = static_cast<int>(rng.index(table.states.n));
    gather(n.next_states, idx, in_a);
    gather(n.actions, idx, tgt_a);
    gather(n.action_next, idx, in_s);
    gather(n.states, idx, tgt_s);
    const double la = grad_nll(model.action_net, in_a, tgt_a, grad);
    adam_step(model.action_net, grad, adam_a);
    const double ls = grad_nll(model.state_net, in_s, tgt_s, grad);
    adam_step(model.state_net, grad, adam_s);
    loss = la + ls;
  }
  return loss;
}

std::vector<double> perturb_first_action(const DiagGaussian& dist,
                                         const PerturbStrategy& strategy,
                                         const Box& action_bounds, Rng& rng) {
  std::vector<double> a;
  switch (strategy.kind) {
    case PerturbKind::none:
      a = gaussian_sample(dist, rng);
      break;
    case PerturbKind::resample: {
      a = gaussian_sample(dist, rng);
      for (double& v : a) v += rng.uniform(-strategy.coef, strategy.coef);
      break;
    }
    case PerturbKind::scale: {
      // Widen sigma more the peakier the distribution: per-dimension
      // entropy below zero blows the multiplier up, high entropy leaves
      // the distribution nearly unchanged.
      const double h = gaussian_entropy(dist) / dist.dim();
      const double log_mult = std::log1p(strategy.coef * std::exp(-h));
      DiagGaussian widened = dist;
      for (double& l : widened.log_std) l += log_mult;
      a = gaussian_sample(widened, rng);
      break;
    }
  }
  return action_bounds.clip(a);
}

TraceBuffer generate_traces(const BackwardsModel& model, const EnvSpec& spec,
                            const DemoSet& demos, int K, int H,
                            const PerturbStrategy& strategy, Rng& rng) {
  if (K < 1 || H < 1) throw ContractError("generate_traces: K and H must be >= 1");
  const Batch anchors = all_states(demos);
  const int n_anchor = anchors.n;
  const int n_chain = n_anchor * K;
  const int sd = spec.state_dim, ad = spec.action_dim;

  TraceBuffer buf;
  buf.states = Batch(n_chain * H, sd);
  buf.actions = Batch(n_chain * H, ad);
  buf.anchor_index.resize(static_cast<std::size_t>(n_chain) * H);

  // One backward chain per (k, anchor) row, all advanced in lockstep so the
  // network passes stay batched.
  auto run_chains = [&](const std::vector<int>& chain_ids, Rng& r,
                        std::vector<int>& failed) {
    const int m = static_cast<int>(chain_ids.size());
    Batch cur(m, sd);
    for (int c = 0; c < m; ++c) {
      const int anchor = chain_ids[c] % n_anchor;
      std::copy(anchors.row(anchor), anchors.row(anchor) + sd, cur.row(c));
    }
    std::vector<bool> dead(m, false);
    Batch norm_cur(m, sd), sa(m, ad + sd);
    for (int step = 1; step <= H; ++step) {
      norm_cur = cur;
      model.state_norm.apply_rows(norm_cur);
      const Batch raw_a = net_forward_raw(model.action_net, norm_cur);
      Batch acts(m, ad);
      for (int c = 0; c < m; ++c) {
        const DiagGaussian head = head_from_raw(raw_a.row(c), ad);
        const DiagGaussian raw_dist = model.action_norm.denormalize(head);
        std::vector<double> a =
            step == 1 ? perturb_first_action(raw_dist, strategy, spec.action_bounds, r)
                      : spec.action_bounds.clip(gaussian_sample(raw_dist, r));
        if (!finite_row(a.data(), ad)) {
          dead[c] = true;
          a.assign(ad, 0.0);
        }
        std::copy(a.begin(), a.end(), acts.row(c));
      }
      Batch norm_acts = acts;
      model.action_norm.apply_rows(norm_acts);
      for (int c = 0; c < m; ++c) {
        std::copy(norm_acts.row(c), norm_acts.row(c) + ad, sa.row(c));
        std::copy(norm_cur.row(c), norm_cur.row(c) + sd, sa.row(c) + ad);
      }
      const Batch raw_s = net_forward_raw(model.state_net, sa);
      for (int c = 0; c < m; ++c) {
        const DiagGaussian head = head_from_raw(raw_s.row(c), sd);
        const DiagGaussian raw_dist = model.state_norm.denormalize(head);
        std::vector<double> prev = gaussian_sample(raw_dist, r);
        if (!finite_row(prev.data(), sd)) {
          dead[c] = true;
          prev.assign(sd, 0.0);
        }
        prev = spec.state_bounds.clip(prev);
        const int slot = chain_ids[c] * H + (step - 1);
        std::copy(prev.begin(), prev.end(), buf.states.row(slot));
        std::copy(acts.row(c), acts.row(c) + ad, buf.actions.row(slot));
        buf.anchor_index[slot] = chain_ids[c] % n_anchor;
        std::copy(prev.begin(), prev.end(), cur.row(c));
      }
    }
    for (int c = 0; c < m; ++c)
      if (dead[c]) failed.push_back(chain_ids[c]);
  };

  std::vector<int> all_chains(n_chain);
  for (int c = 0; c < n_chain; ++c) all_chains[c] = c;
  std::vector<int> failed;
  run_chains(all_chains, rng, failed);
  if (!failed.empty()) {
    // Discard and resample each failed trace once.
    std::vector<int> failed_again;
    run_chains(failed, rng, failed_again);
    if (!failed_again.empty())
      throw GenerationError("trace generation produced non-finite samples twice");
  }
  return buf;
}

void dump_traces(const TraceBuffer& buffer, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open trace dump for writing: " + path);
  nlohmann::json header{{"n_pairs", buffer.size()},
                        {"state_dim", buffer.states.dim},
                        {"action_dim", buffer.actions.dim},
                        {"generation_epoch", buffer.generation_epoch}};
  os << header.dump() << "\n";
  char num[32];
  for (int i = 0; i < buffer.size(); ++i) {
    nlohmann::json s = nlohmann::json::array(), a = nlohmann::json::array();
    for (int j = 0; j < buffer.states.dim; ++j) {
      std::snprintf(num, sizeof(num), "%.17g", buffer.states.row(i)[j]);
      s.push_back(num);
    }
    for (int j = 0; j < buffer.actions.dim; ++j) {
      std::snprintf(num, sizeof(num), "%.17g", buffer.actions.row(i)[j]);
      a.push_back(num);
    }
    nlohmann::json line{{"s", s}, {"a", a}, {"anchor", buffer.anchor_index[i]}};
    os << line.dump() << "\n";
  }
}

}  // namespace bmil
