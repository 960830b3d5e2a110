#!/usr/bin/env python3
"""Smoke tests for the python module."""
import math
import os
import sys
import tempfile

import bmil

FAILURES = []


def check(cond, msg):
    if not cond:
        FAILURES.append(msg)


def main():
    specs = bmil.builtin_specs()
    names = {s.name for s in specs}
    check(names == {"point-umaze", "point-rooms", "point-corridor", "push-box"},
          f"unexpected spec names: {names}")

    spec = bmil.spec_by_name("point-umaze")
    check(spec.horizon == 150, "umaze horizon")
    check(spec.dt == 0.02, "umaze dt")

    # deterministic stepping
    s0 = bmil.env_reset(spec)
    s1, done1 = bmil.env_step(spec, s0, [1.0, 0.0])
    s2, done2 = bmil.env_step(spec, s0, [1.0, 0.0])
    check(s1 == s2 and done1 == done2, "env_step not deterministic")
    check(abs(s1[2] - 0.02) < 1e-15, "velocity integration wrong")

    # closed forms
    check(abs(bmil.gaussian_nll([0.0], [0.0], [0.0]) - 0.5 * math.log(2 * math.pi)) < 1e-12,
          "gaussian_nll closed form")
    check(abs(bmil.gaussian_entropy([0.0], [0.0]) - 0.5 * (1 + math.log(2 * math.pi))) < 1e-12,
          "gaussian_entropy closed form")
    check(bmil.horizon_at(1, 10, 100, 800, 450) == 5, "horizon_at")
    lo, hi = bmil.wilson_ci(50, 100)
    check(abs(lo - 0.4038) < 1e-3 and abs(hi - 0.5962) < 1e-3, "wilson_ci")

    # demos round trip
    demos = bmil.generate_demos(spec, 2, 11)
    check(demos.n_episodes == 2, "demo count")
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "demos.jsonl")
        bmil.save_demos(demos, path)
        back = bmil.load_demos(path)
        check(back.n_transitions == demos.n_transitions, "demo round trip")

        # a tiny training run end to end
        cfg = bmil.preset_config("point-umaze", "bmil")
        cfg.n_epochs = 2
        cfg.policy_steps_per_epoch = 4
        cfg.batch_size = 16
        cfg.model_steps_per_epoch = 2
        cfg.model_batch_size = 16
        cfg.horizon = (1, 2, 1, 3)
        cfg.strategy = "resample:0.3"
        cfg.seed = 5
        result = bmil.train(cfg, spec, demos)
        check(result.policy_grad_steps == 8, "policy step count")
        check(len(result.log) == 2, "log rows")
        a = result.policy.act(spec.init_state)
        check(len(a) == spec.action_dim, "policy action dim")

        ckpt = os.path.join(tmp, "policy.net")
        bmil.save_policy(result.policy, ckpt)
        loaded = bmil.load_policy(ckpt, spec)
        check(loaded.act(spec.init_state) == a, "checkpoint act mismatch")

        rep = bmil.evaluate(result.policy, spec, bmil.InitSampler.training(10), 3)
        check(rep.n_trials == 10, "evaluate trials")
        rep2 = bmil.evaluate(result.policy, spec, bmil.InitSampler.training(10), 3)
        check(rep.to_json() == rep2.to_json(), "evaluate not deterministic")

        ok, steps = bmil.rollout(result.policy, spec, spec.init_state)
        check(isinstance(ok, bool) and steps <= spec.horizon, "rollout surface")

    # error surfaces map to python exceptions
    try:
        bmil.spec_by_name("nope")
        FAILURES.append("spec_by_name('nope') did not raise")
    except bmil.ValidationError:
        pass

    if FAILURES:
        print("PYTHON SMOKE FAILURES:")
        for f in FAILURES:
            print(" -", f)
        return 1
    print("python smoke tests passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
