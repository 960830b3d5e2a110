#!/usr/bin/env python3
"""End-to-end checks of the bmil command line tool."""
import json
import os
import subprocess
import sys
import tempfile

BMIL = sys.argv[1] if len(sys.argv) > 1 else "bmil"
FAILURES = []


def run(*args, expect=0, env=None):
    e = dict(os.environ)
    if env:
        e.update(env)
    proc = subprocess.run([BMIL, *args], capture_output=True, text=True, env=e)
    if proc.returncode != expect:
        FAILURES.append(
            f"{' '.join(args)}: exit {proc.returncode} (expected {expect})\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def check(cond, msg):
    if not cond:
        FAILURES.append(msg)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        demo_dir = os.path.join(tmp, "demos")

        # gen-demos: determinism and manifest
        run("gen-demos", "--env", "point-umaze", "--n", "3", "--seed", "7",
            "--out", demo_dir)
        demo_file = os.path.join(demo_dir, "demos_point-umaze_n3_rep1_seed7.jsonl")
        check(os.path.exists(demo_file), "demo file missing")
        check(os.path.exists(demo_file + ".manifest.json"), "demo manifest missing")
        first = open(demo_file, "rb").read()
        run("gen-demos", "--env", "point-umaze", "--n", "3", "--seed", "7",
            "--out", demo_dir)
        check(open(demo_file, "rb").read() == first, "gen-demos rerun not bit-identical")

        # usage errors exit with code 2
        run("gen-demos", "--env", "point-umaze", "--n", "0", "--seed", "1",
            "--out", demo_dir, expect=2)
        run("definitely-not-a-command", expect=2)
        run("train", "--mode", "bogus", "--demos", demo_file, "--env", "point-umaze",
            "--out", os.path.join(tmp, "x"), expect=2)

        # missing demo file: validation error, no partial artifacts
        missing_out = os.path.join(tmp, "missing_run")
        run("train", "--env", "point-umaze", "--mode", "bc", "--demos",
            os.path.join(tmp, "nope.jsonl"), "--out", missing_out, expect=3)
        check(not os.path.exists(missing_out), "train left partial artifacts")

        # train (tiny budget) and eval
        train_out = os.path.join(tmp, "bc_run")
        run("train", "--env", "point-umaze", "--mode", "bc", "--demos", demo_file,
            "--seed", "3", "--epochs", "2", "--policy-steps", "4", "--batch", "16",
            "--out", train_out)
        policy = os.path.join(train_out, "policy.net")
        check(os.path.exists(policy), "policy checkpoint missing")
        check(os.path.exists(os.path.join(train_out, "train_log.csv")), "train log missing")
        manifest = json.load(open(os.path.join(train_out, "manifest.json")))
        check(manifest["config"]["mode"] == "bc", "manifest config echo wrong")
        check("demo_sha1" in manifest, "manifest missing demo hash")

        # conflicting preset/env
        run("train", "--preset", "push-box", "--env", "point-umaze", "--mode", "bc",
            "--demos", demo_file, "--out", os.path.join(tmp, "y"), expect=2)

        # preset values flow into the manifest; flags override the preset
        push_demo_dir = os.path.join(tmp, "push_demos")
        run("gen-demos", "--env", "push-box", "--n", "2", "--replicate", "1",
            "--seed", "4", "--out", push_demo_dir)
        push_demo = os.path.join(push_demo_dir, "demos_push-box_n2_rep1_seed4.jsonl")
        preset_out = os.path.join(tmp, "preset_run")
        run("train", "--preset", "push-box", "--mode", "bmil", "--demos", push_demo,
            "--epochs", "1", "--policy-steps", "2", "--model-steps", "2",
            "--out", preset_out)
        pm = json.load(open(os.path.join(preset_out, "manifest.json")))
        check(pm["config"]["p_d"] == 0.5, "push-box preset p_d not 0.5")
        check(pm["config"]["batch_size"] == 64, "push-box preset batch not 64")
        check(pm["config"]["n_epochs"] == 1, "flag override lost")

        # config file sits between preset and flags in precedence
        cfg_path = os.path.join(tmp, "cfg.json")
        json.dump({"p_d": 0.25, "n_epochs": 1, "policy_steps_per_epoch": 2,
                   "model_steps_per_epoch": 2}, open(cfg_path, "w"))
        cfg_out = os.path.join(tmp, "cfg_run")
        run("train", "--preset", "push-box", "--mode", "bmil", "--demos", push_demo,
            "--config", cfg_path, "--pd", "0.75", "--out", cfg_out)
        cm = json.load(open(os.path.join(cfg_out, "manifest.json")))
        check(cm["config"]["p_d"] == 0.75, "flag should beat config file")
        check(cm["config"]["batch_size"] == 64, "preset value should survive")

        # unknown config keys are usage errors
        bad_cfg = os.path.join(tmp, "bad.json")
        json.dump({"nonsense": 1}, open(bad_cfg, "w"))
        run("train", "--preset", "push-box", "--mode", "bc", "--demos", push_demo,
            "--config", bad_cfg, "--out", os.path.join(tmp, "v"), expect=2)

        # eval with the training sampler
        eval_out = os.path.join(tmp, "eval_training")
        run("eval", "--env", "point-umaze", "--policy", policy, "--sampler", "training",
            "--n", "25", "--seed", "5", "--out", eval_out)
        rep = json.load(open(os.path.join(eval_out, "report.json")))
        check(rep["n_trials"] == 25, "eval trial count wrong")

        # identical seed -> identical report bytes
        eval_out2 = os.path.join(tmp, "eval_training2")
        run("eval", "--env", "point-umaze", "--policy", policy, "--sampler", "training",
            "--n", "25", "--seed", "5", "--out", eval_out2)
        check(open(os.path.join(eval_out, "report.json"), "rb").read() ==
              open(os.path.join(eval_out2, "report.json"), "rb").read(),
              "eval rerun not bit-identical")

        # grid eval produces the per-cell matrix, csv and svg
        grid_out = os.path.join(tmp, "eval_grid")
        run("eval", "--env", "point-umaze", "--policy", policy, "--sampler", "grid",
            "--cells", "4x4", "--per-cell", "3", "--seed", "5", "--out", grid_out)
        rep = json.load(open(os.path.join(grid_out, "report.json")))
        check(rep["cells_x"] == 4 and rep["cells_y"] == 4, "grid dims wrong")
        check(len(rep["per_cell"]) == 16, "per_cell matrix wrong")
        check(os.path.exists(os.path.join(grid_out, "heatmap.svg")), "heatmap missing")
        check(os.path.exists(os.path.join(grid_out, "per_cell.csv")), "per-cell csv missing")

        # conflicting sampler options
        run("eval", "--env", "point-umaze", "--policy", policy, "--sampler", "grid",
            "--n", "10", "--out", os.path.join(tmp, "z"), expect=2)

        # checkpoint/env mismatch
        run("eval", "--env", "push-box", "--policy", policy, "--sampler", "training",
            "--n", "5", "--out", os.path.join(tmp, "w"), expect=3)

        # report subcommand combines saved reports
        rep_out = os.path.join(tmp, "combined")
        bc_rep = os.path.join(eval_out, "report.json")
        data = json.load(open(bc_rep))
        data["method"] = "bc"
        patched = os.path.join(tmp, "bc_report.json")
        json.dump(data, open(patched, "w"))
        run("report", "--inputs", patched, "--out", rep_out)
        lines = open(os.path.join(rep_out, "comparison.csv")).read().splitlines()
        check(lines[0] == "method,rate,ci_low,ci_high,ratio_to_bc", "comparison header wrong")
        check(len(lines) == 2, "comparison row count wrong")

        # BMIL_OUT fallback
        env_out = os.path.join(tmp, "via_env")
        run("gen-demos", "--env", "push-box", "--n", "1", "--seed", "1",
            env={"BMIL_OUT": env_out})
        check(os.path.isdir(env_out), "BMIL_OUT not honored")

    if FAILURES:
        print("CLI TEST FAILURES:")
        for f in FAILURES:
            print(" -", f)
        return 1
    print("cli tests passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
