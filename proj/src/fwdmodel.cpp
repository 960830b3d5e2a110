#include "bmil/fwdmodel.hpp"

#include <algorithm>
#include <cmath>

namespace bmil {

namespace {

constexpr int kForwardHidden = 362;
constexpr int kForwardLayers = 4;

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

struct NormalizedForward {
  Batch sa;          // (normalized s, normalized a)
  Batch next_states; // normalized s'
};

NormalizedForward normalize_table(const ForwardModel& m, const TransitionTable& t) {
  NormalizedForward n;
  Batch s = t.states, a = t.actions;
  m.state_norm.apply_rows(s);
  m.action_norm.apply_rows(a);
  n.next_states = t.next_states;
  m.state_norm.apply_rows(n.next_states);
  n.sa = Batch(t.states.n, s.dim + a.dim);
  for (int i = 0; i < t.states.n; ++i) {
    double* r = n.sa.row(i);
    std::copy(s.row(i), s.row(i) + s.dim, r);
    std::copy(a.row(i), a.row(i) + a.dim, r + s.dim);
  }
  return n;
}

}  // namespace

ForwardModel make_forward_model(const EnvSpec& spec, const DemoSet& demos, Rng& rng) {
  ForwardModel m;
  std::vector<int> dims{spec.state_dim + spec.action_dim};
  for (int l = 0; l < kForwardLayers; ++l) dims.push_back(kForwardHidden);
  dims.push_back(2 * spec.state_dim);
  m.net = make_net(dims, rng);
  m.state_norm = Normalizer::fit(all_states(demos));
  m.action_norm = Normalizer::fit(flatten(demos).actions);
  m.adam = make_adam(m.net);
  return m;
}

double forward_loss(const ForwardModel& model, const TransitionTable& table) {
  const NormalizedForward n = normalize_table(model, table);
  return nll_loss(model.net, n.sa, n.next_states);
}

double train_forward(ForwardModel& model, const DemoSet& demos, int steps,
                     int batch_size, Rng& rng) {
  if (steps < 0 || batch_size <= 0)
    throw ContractError("train_forward: bad steps/batch_size");
  const auto table = flatten(demos);
  if (steps == 0) return forward_loss(model, table);
  const NormalizedForward n = normalize_table(model, table);

  NetParams grad;
  Batch in(batch_size, n.sa.dim), tgt(batch_size, n.next_states.dim);
  double loss = 0.0;
  for (int step = 0; step < steps; ++step) {
    for (int i = 0; i < batch_size; ++i) {
      const int idx = static_cast<int>(rng.index(table.states.n));
      std::copy(n.sa.row(idx), n.sa.row(idx) + n.sa.dim, in.row(i));
      std::copy(n.next_states.row(idx), n.next_states.row(idx) + tgt.dim, tgt.row(i));
    }
    loss = grad_nll(model.net, in, tgt, grad);
    adam_step(model.net, grad, model.adam);
  }
  return loss;
}

TraceBuffer generate_forward_traces(const ForwardModel& model, const Policy& policy,
                                    const EnvSpec& spec, const DemoSet& demos,
                                    int K, int H, Rng& rng) {
  if (K < 1 || H < 1) throw ContractError("generate_forward_traces: K and H must be >= 1");
  const Batch anchors = all_states(demos);
  const int n_anchor = anchors.n;
  const int n_chain = n_anchor * K;
  const int sd = spec.state_dim, ad = spec.action_dim;

  TraceBuffer buf;
  buf.states = Batch(n_chain * H, sd);
  buf.actions = Batch(n_chain * H, ad);
  buf.anchor_index.resize(static_cast<std::size_t>(n_chain) * H);

  auto run_chains = [&](const std::vector<int>& chain_ids, Rng& r,
                        std::vector<int>& failed) {
    const int m = static_cast<int>(chain_ids.size());
    Batch cur(m, sd);
    for (int c = 0; c < m; ++c) {
      const int anchor = chain_ids[c] % n_anchor;
      std::copy(anchors.row(anchor), anchors.row(anchor) + sd, cur.row(c));
    }
    std::vector<bool> dead(m, false);
    for (int step = 1; step <= H; ++step) {
      Batch norm_cur = cur;
      policy.state_norm.apply_rows(norm_cur);
      const Batch raw_pi = net_forward_raw(policy.net, norm_cur);
      Batch acts(m, ad);
      for (int c = 0; c < m; ++c) {
        const DiagGaussian head = head_from_raw(raw_pi.row(c), ad);
        const auto mean = policy.action_norm.invert(head.mean);
        const auto a = spec.action_bounds.clip(mean);
        std::copy(a.begin(), a.end(), acts.row(c));
      }
      Batch model_in(m, sd + ad);
      Batch norm_cur2 = cur, norm_acts = acts;
      model.state_norm.apply_rows(norm_cur2);
      model.action_norm.apply_rows(norm_acts);
      for (int c = 0; c < m; ++c) {
        std::copy(norm_cur2.row(c), norm_cur2.row(c) + sd, model_in.row(c));
        std::copy(norm_acts.row(c), norm_acts.row(c) + ad, model_in.row(c) + sd);
      }
      const Batch raw_next = net_forward_raw(model.net, model_in);
      for (int c = 0; c < m; ++c) {
        const int slot = chain_ids[c] * H + (step - 1);
        std::copy(cur.row(c), cur.row(c) + sd, buf.states.row(slot));
        std::copy(acts.row(c), acts.row(c) + ad, buf.actions.row(slot));
        buf.anchor_index[slot] = chain_ids[c] % n_anchor;

        const DiagGaussian head = head_from_raw(raw_next.row(c), sd);
        const DiagGaussian raw_dist = model.state_norm.denormalize(head);
        std::vector<double> next = gaussian_sample(raw_dist, r);
        if (!finite_row(next.data(), sd)) {
          dead[c] = true;
          next.assign(sd, 0.0);
        }
        next = spec.state_bounds.clip(next);
        std::copy(next.begin(), next.end(), cur.row(c));
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
    std::vector<int> failed_again;
    run_chains(failed, rng, failed_again);
    if (!failed_again.empty())
      throw GenerationError("forward trace generation produced non-finite samples twice");
  }
  return buf;
}

}  // namespace bmil
