#include "bmil/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "bmil/backmodel.hpp"
#include "bmil/demgen.hpp"
#include "bmil/fwdmodel.hpp"

namespace bmil {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string sha1_hex(std::string_view data) {
  std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
  const std::uint64_t ml = static_cast<std::uint64_t>(data.size()) * 8u;
  std::vector<unsigned char> msg(data.begin(), data.end());
  msg.push_back(0x80);
  while (msg.size() % 64 != 56) msg.push_back(0);
  for (int i = 7; i >= 0; --i) msg.push_back(static_cast<unsigned char>((ml >> (8 * i)) & 0xff));
  auto rol = [](std::uint32_t v, int s) { return (v << s) | (v >> (32 - s)); };
  for (std::size_t chunk = 0; chunk < msg.size(); chunk += 64) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (static_cast<std::uint32_t>(msg[chunk + 4 * i]) << 24) |
             (static_cast<std::uint32_t>(msg[chunk + 4 * i + 1]) << 16) |
             (static_cast<std::uint32_t>(msg[chunk + 4 * i + 2]) << 8) |
             static_cast<std::uint32_t>(msg[chunk + 4 * i + 3]);
    for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }
  char out[41];
  std::snprintf(out, sizeof(out), "%08x%08x%08x%08x%08x", h[0], h[1], h[2], h[3], h[4]);
  return out;
}

std::string sha1_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot hash missing file: " + path);
  std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return sha1_hex(data);
}

DemoPreset demo_preset(const std::string& env_name) {
  if (env_name == "push-box") return {5, 10};
  if (env_name == "point-umaze" || env_name == "point-rooms" || env_name == "point-corridor")
    return {20, 1};
  throw ValidationError("no demo preset for environment: " + env_name);
}

std::string ensure_demo_file(const EnvSpec& spec, int n_demos, int replication,
                             std::uint64_t seed, const std::string& dir) {
  fs::create_directories(dir);
  char name[160];
  std::snprintf(name, sizeof(name), "demos_%s_n%d_rep%d_seed%llu.jsonl", spec.name.c_str(),
                n_demos, replication, static_cast<unsigned long long>(seed));
  const std::string path = (fs::path(dir) / name).string();
  if (fs::exists(path)) return path;
  DemoSet demos = generate_demos(spec, n_demos, seed);
  if (replication > 1) demos = replicate_demos(demos, replication);
  const std::string tmp = path + ".tmp";
  save_demos(demos, tmp);
  fs::rename(tmp, path);
  return path;
}

std::string config_to_json(const TrainConfig& c) {
  json j{{"env", c.env},
         {"mode", mode_to_string(c.mode)},
         {"seed", std::to_string(c.seed)},
         {"n_epochs", c.n_epochs},
         {"policy_steps_per_epoch", c.policy_steps_per_epoch},
         {"batch_size", c.batch_size},
         {"p_d", c.p_d},
         {"k_traces", c.k_traces},
         {"horizon", {{"x", c.schedule.x}, {"y", c.schedule.y}, {"a", c.schedule.a}, {"b", c.schedule.b}}},
         {"strategy",
          {{"kind", c.strategy.kind == PerturbKind::none
                        ? "none"
                        : (c.strategy.kind == PerturbKind::resample ? "resample" : "scale")},
           {"coef", c.strategy.coef}}},
         {"model_steps_per_epoch", c.model_steps_per_epoch},
         {"model_batch_size", c.model_batch_size}};
  return j.dump(2);
}

TrainConfig config_from_json(const std::string& text, const TrainConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
  static const std::vector<std::string> known = {
      "env", "mode", "seed", "n_epochs", "policy_steps_per_epoch", "batch_size",
      "p_d", "k_traces", "horizon", "strategy", "model_steps_per_epoch",
      "model_batch_size"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("config json: unknown key '" + it.key() + "'");
  TrainConfig c = base;
  try {
    if (j.contains("env")) c.env = j["env"].get<std::string>();
    if (j.contains("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
    if (j.contains("seed"))
      c.seed = std::strtoull(j["seed"].get<std::string>().c_str(), nullptr, 10);
    if (j.contains("n_epochs")) c.n_epochs = j["n_epochs"].get<int>();
    if (j.contains("policy_steps_per_epoch"))
      c.policy_steps_per_epoch = j["policy_steps_per_epoch"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("p_d")) c.p_d = j["p_d"].get<double>();
    if (j.contains("k_traces")) c.k_traces = j["k_traces"].get<int>();
    if (j.contains("horizon")) {
      const auto& h = j["horizon"];
      c.schedule = {h.at("x").get<int>(), h.at("y").get<int>(), h.at("a").get<int>(),
                    h.at("b").get<int>()};
    }
    if (j.contains("strategy")) {
      const auto& s = j["strategy"];
      const std::string kind = s.at("kind").get<std::string>();
      if (kind == "none")
        c.strategy = PerturbStrategy::none();
      else if (kind == "resample")
        c.strategy = PerturbStrategy::resample(s.at("coef").get<double>());
      else if (kind == "scale")
        c.strategy = PerturbStrategy::scale(s.at("coef").get<double>());
      else
        throw ConfigError("config json: unknown strategy kind '" + kind + "'");
    }
    if (j.contains("model_steps_per_epoch"))
      c.model_steps_per_epoch = j["model_steps_per_epoch"].get<int>();
    if (j.contains("model_batch_size"))
      c.model_batch_size = j["model_batch_size"].get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
  return c;
}

std::string sampler_to_json(const InitSampler& s) {
  json j;
  switch (s.kind) {
    case InitSampler::Kind::grid:
      j = {{"kind", "grid"},
           {"cells_x", s.cells_x},
           {"cells_y", s.cells_y},
           {"samples_per_cell", s.samples_per_cell}};
      break;
    case InitSampler::Kind::uniform:
      j = {{"kind", "uniform"}, {"n_samples", s.n_samples}};
      if (s.region.dim() == 2) j["region"] = {{"lo", s.region.lo}, {"hi", s.region.hi}};
      break;
    case InitSampler::Kind::training:
      j = {{"kind", "training"}, {"n_samples", s.n_samples}};
      break;
  }
  if (s.velocity_noise.dim() == 2)
    j["velocity_noise"] = {{"lo", s.velocity_noise.lo}, {"hi", s.velocity_noise.hi}};
  return j.dump();
}

InitSampler sampler_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    InitSampler s;
    if (kind == "grid") {
      s = InitSampler::grid(j.at("cells_x").get<int>(), j.at("cells_y").get<int>(),
                            j.at("samples_per_cell").get<int>());
    } else if (kind == "uniform") {
      s = InitSampler::uniform(j.at("n_samples").get<int>());
      if (j.contains("region")) {
        s.region.lo = j["region"].at("lo").get<std::vector<double>>();
        s.region.hi = j["region"].at("hi").get<std::vector<double>>();
      }
    } else if (kind == "training") {
      s = InitSampler::training(j.at("n_samples").get<int>());
    } else {
      throw ConfigError("sampler json: unknown kind '" + kind + "'");
    }
    if (j.contains("velocity_noise")) {
      s.velocity_noise.lo = j["velocity_noise"].at("lo").get<std::vector<double>>();
      s.velocity_noise.hi = j["velocity_noise"].at("hi").get<std::vector<double>>();
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sampler json: ") + e.what());
  }
}

namespace {

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write: " + path);
  os << text;
}

Normalizer concat_norms(const Normalizer& a, const Normalizer& b) {
  Normalizer n;
  n.mean = a.mean;
  n.mean.insert(n.mean.end(), b.mean.begin(), b.mean.end());
  n.stdev = a.stdev;
  n.stdev.insert(n.stdev.end(), b.stdev.begin(), b.stdev.end());
  return n;
}

// Writes checkpoints and the training log; returns { relpath: sha1 }.
json save_train_artifacts(const TrainResult& tr, const fs::path& dir) {
  json artifacts = json::object();
  auto emit = [&](const std::string& rel, auto&& writer) {
    const std::string p = (dir / rel).string();
    writer(p);
    artifacts[rel] = sha1_file(p);
  };
  emit("policy.net", [&](const std::string& p) { save_policy(tr.policy, p); });
  if (tr.backwards) {
    emit("model_action.net", [&](const std::string& p) {
      save_net(p, tr.backwards->action_net, tr.backwards->state_norm,
               tr.backwards->action_norm);
    });
    emit("model_state.net", [&](const std::string& p) {
      save_net(p, tr.backwards->state_net,
               concat_norms(tr.backwards->action_norm, tr.backwards->state_norm),
               tr.backwards->state_norm);
    });
  }
  if (tr.forward) {
    emit("model_forward.net", [&](const std::string& p) {
      save_net(p, tr.forward->net,
               concat_norms(tr.forward->state_norm, tr.forward->action_norm),
               tr.forward->state_norm);
    });
  }
  // The log carries wall-clock timings, so it stays out of the hashed
  // artifact map that reuse checks compare.
  write_train_log(tr.log, (dir / "train_log.csv").string());
  return artifacts;
}

}  // namespace

TrainResult train_to_dir(const EnvSpec& spec, const TrainConfig& config,
                         const std::string& demo_path, const std::string& out_dir) {
  const DemoSet demos = load_demos_for(demo_path, spec);
  TrainResult tr = train(config, spec, demos);
  fs::create_directories(out_dir);
  const json artifacts = save_train_artifacts(tr, out_dir);
  json manifest{{"tool_version", kToolVersion},
                {"created_utc", utc_now()},
                {"env", spec.name},
                {"config", json::parse(config_to_json(config))},
                {"demo_file", fs::path(demo_path).filename().string()},
                {"demo_sha1", sha1_file(demo_path)},
                {"artifacts", artifacts},
                {"policy_grad_steps", tr.policy_grad_steps},
                {"model_grad_steps", tr.model_grad_steps}};
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  return tr;
}

RunOutput execute_run(const EnvSpec& spec, const RunSpec& run, const std::string& out_root) {
  const fs::path dir = fs::path(out_root) / run.name;
  const std::string manifest_path = (dir / "manifest.json").string();
  const std::string config_json = config_to_json(run.config);
  const std::string sampler_json = sampler_to_json(run.sampler);
  const std::string demo_sha = sha1_file(run.demo_path);

  RunOutput out;
  out.dir = dir.string();
  out.method = run.method;

  // A completed run with matching inputs and intact artifacts is reused.
  if (fs::exists(manifest_path)) {
    try {
      std::ifstream is(manifest_path);
      const json m = json::parse(is);
      bool match = m.at("tool_version") == kToolVersion &&
                   m.at("config") == json::parse(config_json) &&
                   m.at("eval").at("sampler") == json::parse(sampler_json) &&
                   m.at("eval").at("seed") == std::to_string(run.eval_seed) &&
                   m.at("demo_sha1") == demo_sha;
      if (match) {
        for (const auto& [rel, sha] : m.at("artifacts").items()) {
          const std::string p = (dir / rel).string();
          if (!fs::exists(p) || sha1_file(p) != sha.get<std::string>()) {
            match = false;
            break;
          }
        }
      }
      if (match) {
        out.report = load_report((dir / "report.json").string());
        out.policy_grad_steps = m.at("policy_grad_steps").get<long>();
        out.model_grad_steps = m.at("model_grad_steps").get<long>();
        out.reused = true;
        return out;
      }
    } catch (const std::exception&) {
      // fall through and re-run
    }
  }

  fs::create_directories(dir);
  const DemoSet demos = load_demos_for(run.demo_path, spec);
  TrainResult tr = train(run.config, spec, demos);
  json artifacts = save_train_artifacts(tr, dir);
  auto emit = [&](const std::string& rel, auto&& writer) {
    const std::string p = (dir / rel).string();
    writer(p);
    artifacts[rel] = sha1_file(p);
  };

  RobustnessReport rep = evaluate(tr.policy, spec, run.sampler, run.eval_seed,
                                  run.eval_workers);
  rep.method = run.method;
  emit("report.json", [&](const std::string& p) { save_report(rep, p); });
  if (!rep.per_cell.empty()) {
    emit("per_cell.csv", [&](const std::string& p) { write_per_cell_csv(rep, p); });
    emit("heatmap.svg", [&](const std::string& p) { write_heatmap_svg(rep, p); });
  }

  json manifest{{"tool_version", kToolVersion},
                {"created_utc", utc_now()},
                {"run_name", run.name},
                {"method", run.method},
                {"env", spec.name},
                {"config", json::parse(config_json)},
                {"eval",
                 {{"sampler", json::parse(sampler_json)},
                  {"seed", std::to_string(run.eval_seed)},
                  {"workers", run.eval_workers}}},
                {"demo_file", fs::path(run.demo_path).filename().string()},
                {"demo_sha1", demo_sha},
                {"artifacts", artifacts},
                {"policy_grad_steps", tr.policy_grad_steps},
                {"model_grad_steps", tr.model_grad_steps}};
  write_text(manifest_path, manifest.dump(2) + "\n");

  out.report = rep;
  out.policy_grad_steps = tr.policy_grad_steps;
  out.model_grad_steps = tr.model_grad_steps;
  return out;
}

std::vector<RunOutput> execute_runs(const std::vector<RunSpec>& runs,
                                    const std::string& out_root, int n_workers) {
  std::vector<RunOutput> outputs(runs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        EnvSpec spec = spec_by_name(runs[i].config.env);
        outputs[i] = execute_run(spec, runs[i], out_root);
      } catch (const std::exception& e) {
        outputs[i].dir = (fs::path(out_root) / runs[i].name).string();
        outputs[i].method = runs[i].method;
        outputs[i].failed = true;
        outputs[i].error = e.what();
      }
    }
  };
  n_workers = std::max(1, std::min<int>(n_workers, static_cast<int>(runs.size())));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  return outputs;
}

MethodAggregate aggregate_method(const std::string& method,
                                 const std::vector<RobustnessReport>& reports) {
  if (reports.empty()) throw ContractError("aggregate_method: no reports");
  MethodAggregate agg;
  agg.method = method;
  double mean = 0.0;
  for (const auto& r : reports) {
    agg.pooled_successes += r.n_success;
    agg.pooled_trials += r.n_trials;
    agg.per_seed_rates.push_back(r.overall_rate);
    mean += r.overall_rate;
  }
  agg.seed_mean_rate = mean / reports.size();
  agg.pooled_rate = static_cast<double>(agg.pooled_successes) / agg.pooled_trials;
  std::tie(agg.ci_low, agg.ci_high) = wilson_ci(agg.pooled_successes, agg.pooled_trials);
  return agg;
}

void write_aggregate_csv(const std::vector<MethodAggregate>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write: " + path);
  os << "method,seed_mean_rate,pooled_rate,ci_low,ci_high,pooled_successes,pooled_trials,n_seeds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%d,%d,%zu\n",
                  r.method.c_str(), r.seed_mean_rate, r.pooled_rate, r.ci_low,
                  r.ci_high, r.pooled_successes, r.pooled_trials,
                  r.per_seed_rates.size());
    os << buf;
  }
}

std::vector<std::string> study_names() {
  return {"robustness", "fwd-vs-bwd", "strategy", "demo-count", "budget", "model-first"};
}

StudyResult run_study(const std::string& study, const StudyOptions& opt,
                      const std::string& out_root) {
  const auto names = study_names();
  if (std::find(names.begin(), names.end(), study) == names.end())
    throw ConfigError("unknown study preset: " + study);
  EnvSpec spec = spec_by_name(opt.env);
  const fs::path study_dir = fs::path(out_root) / (study + "_" + opt.env);
  fs::create_directories(study_dir);

  const DemoPreset dp = demo_preset(opt.env);
  const InitSampler sampler = InitSampler::uniform(opt.n_eval);

  std::vector<RunSpec> runs;
  auto add_run = [&](const std::string& label, TrainConfig cfg, std::uint64_t seed,
                     const std::string& demo_path) {
    cfg.seed = seed;
    if (opt.epochs_override > 0) cfg.n_epochs = opt.epochs_override;
    if (opt.policy_steps_override > 0) cfg.policy_steps_per_epoch = opt.policy_steps_override;
    if (opt.model_steps_override > 0) cfg.model_steps_per_epoch = opt.model_steps_override;
    RunSpec r;
    r.name = label + "_seed" + std::to_string(seed);
    r.method = label;
    r.config = std::move(cfg);
    r.demo_path = demo_path;
    r.sampler = sampler;
    r.eval_seed = seed;
    runs.push_back(std::move(r));
  };

  for (int si = 0; si < opt.n_seeds; ++si) {
    const std::uint64_t seed = opt.base_seed + si;
    const std::string demo_path =
        ensure_demo_file(spec, dp.n_demos, dp.replication, seed, study_dir.string());
    if (study == "robustness") {
      add_run("bc", preset_config(opt.env, Mode::bc), seed, demo_path);
      add_run("bmil", preset_config(opt.env, Mode::bmil), seed, demo_path);
    } else if (study == "fwd-vs-bwd") {
      add_run("bc", preset_config(opt.env, Mode::bc), seed, demo_path);
      add_run("fmil", preset_config(opt.env, Mode::fmil), seed, demo_path);
      add_run("bmil", preset_config(opt.env, Mode::bmil), seed, demo_path);
    } else if (study == "model-first") {
      add_run("bc", preset_config(opt.env, Mode::bc), seed, demo_path);
      add_run("bmil", preset_config(opt.env, Mode::bmil), seed, demo_path);
      add_run("bmil-model-first", preset_config(opt.env, Mode::bmil_model_first), seed,
              demo_path);
    } else if (study == "strategy") {
      add_run("bc", preset_config(opt.env, Mode::bc), seed, demo_path);
      struct Entry {
        const char* label;
        PerturbStrategy strategy;
      };
      const Entry entries[] = {{"bmil-none", PerturbStrategy::none()},
                               {"bmil-rs0.1", PerturbStrategy::resample(0.1)},
                               {"bmil-rs0.3", PerturbStrategy::resample(0.3)},
                               {"bmil-sc30", PerturbStrategy::scale(30.0)},
                               {"bmil-sc50", PerturbStrategy::scale(50.0)}};
      for (const auto& e : entries) {
        TrainConfig cfg = preset_config(opt.env, Mode::bmil);
        cfg.strategy = e.strategy;
        add_run(e.label, cfg, seed, demo_path);
      }
    } else if (study == "budget") {
      for (int mult : opt.budgets) {
        TrainConfig cfg = compute_budget_variant(preset_config(opt.env, Mode::bc), mult);
        add_run(mult == 1 ? "bc" : "bc-" + std::to_string(mult) + "x", cfg, seed, demo_path);
      }
      add_run("bmil", preset_config(opt.env, Mode::bmil), seed, demo_path);
    } else if (study == "demo-count") {
      for (int count : opt.demo_counts) {
        const std::string dpath =
            ensure_demo_file(spec, count, dp.replication, seed, study_dir.string());
        const std::string tag = "-d" + std::to_string(count);
        add_run("bc" + tag, preset_config(opt.env, Mode::bc), seed, dpath);
        add_run("bmil" + tag, preset_config(opt.env, Mode::bmil), seed, dpath);
      }
    }
  }

  StudyResult result;
  result.dir = study_dir.string();
  result.runs = execute_runs(runs, (study_dir / "runs").string(), opt.n_workers);

  // Pool per method, in first-appearance order.
  std::vector<std::string> order;
  for (const auto& r : runs)
    if (std::find(order.begin(), order.end(), r.method) == order.end())
      order.push_back(r.method);
  std::vector<RobustnessReport> pooled_reports;
  for (const auto& method : order) {
    std::vector<RobustnessReport> reps;
    for (const auto& o : result.runs)
      if (!o.failed && o.method == method) reps.push_back(o.report);
    if (reps.empty()) {
      result.incomplete = true;
      continue;
    }
    const MethodAggregate agg = aggregate_method(method, reps);
    result.aggregates.push_back(agg);
    RobustnessReport pooled;
    pooled.method = method;
    pooled.env = spec.name;
    pooled.n_success = agg.pooled_successes;
    pooled.n_trials = agg.pooled_trials;
    pooled.overall_rate = agg.pooled_rate;
    pooled.ci_low = agg.ci_low;
    pooled.ci_high = agg.ci_high;
    pooled_reports.push_back(pooled);
  }
  for (const auto& o : result.runs)
    if (o.failed) result.incomplete = true;

  write_aggregate_csv(result.aggregates, (study_dir / "aggregate.csv").string());
  const bool has_bc = std::any_of(pooled_reports.begin(), pooled_reports.end(),
                                  [](const auto& r) { return r.method == "bc"; });
  if (has_bc)
    write_comparison_csv(compare(pooled_reports), (study_dir / "comparison.csv").string());

  json manifest{{"tool_version", kToolVersion},
                {"created_utc", utc_now()},
                {"study", study},
                {"env", opt.env},
                {"n_seeds", opt.n_seeds},
                {"base_seed", std::to_string(opt.base_seed)},
                {"n_eval", opt.n_eval},
                {"incomplete", result.incomplete}};
  json runlist = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runlist.push_back({{"name", runs[i].name},
                       {"method", runs[i].method},
                       {"failed", result.runs[i].failed},
                       {"error", result.runs[i].error}});
  }
  manifest["runs"] = runlist;
  write_text((study_dir / "study.json").string(), manifest.dump(2) + "\n");
  return result;
}

}  // namespace bmil
