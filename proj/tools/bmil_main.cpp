#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmil/backmodel.hpp"
#include "bmil/demgen.hpp"
#include "bmil/envsim.hpp"
#include "bmil/evalharness.hpp"
#include "bmil/fwdmodel.hpp"
#include "bmil/imitation.hpp"
#include "bmil/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

std::string out_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("BMIL_OUT"); env && *env) return env;
  return "bmil_out";
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw bmil::ValidationError("cannot write: " + path);
  os << text;
}

struct TrainFlags {
  std::string env, preset, config_file, demos, mode = "bmil", out;
  std::uint64_t seed = 1;
  int epochs = -1, policy_steps = -1, batch = -1, k_traces = -1;
  int model_steps = -1, model_batch = -1, budget = 1;
  double p_d = -1.0;
  std::string horizon, strategy;
};

bmil::HorizonSchedule parse_horizon(const std::string& text) {
  bmil::HorizonSchedule h;
  if (std::sscanf(text.c_str(), "%d:%d:%d:%d", &h.x, &h.y, &h.a, &h.b) != 4)
    throw bmil::ConfigError("--horizon expects x:y:a:b, got '" + text + "'");
  return h;
}

bmil::PerturbStrategy parse_strategy(const std::string& text) {
  if (text == "none") return bmil::PerturbStrategy::none();
  double coef = 0.0;
  if (std::sscanf(text.c_str(), "resample:%lf", &coef) == 1)
    return bmil::PerturbStrategy::resample(coef);
  if (std::sscanf(text.c_str(), "scale:%lf", &coef) == 1)
    return bmil::PerturbStrategy::scale(coef);
  throw bmil::ConfigError("--strategy expects none, resample:<b> or scale:<c>");
}

int cmd_gen_demos(const std::string& env, int n, int replicate, std::uint64_t seed,
                  const std::string& out_flag) {
  const bmil::EnvSpec spec = bmil::spec_by_name(env);
  const std::string dir = out_root(out_flag);
  fs::create_directories(dir);
  bmil::DemoSet demos = bmil::generate_demos(spec, n, seed);
  if (replicate > 1) demos = bmil::replicate_demos(demos, replicate);
  char name[160];
  std::snprintf(name, sizeof(name), "demos_%s_n%d_rep%d_seed%llu.jsonl", env.c_str(), n,
                replicate, static_cast<unsigned long long>(seed));
  const std::string path = (fs::path(dir) / name).string();
  bmil::save_demos(demos, path);
  json manifest{{"tool_version", bmil::kToolVersion},
                {"created_utc", utc_now()},
                {"env", env},
                {"n_demos", n},
                {"replication_factor", replicate},
                {"seed", std::to_string(seed)},
                {"episodes", demos.episodes.size()},
                {"transitions", demos.total_transitions()},
                {"dataset", name},
                {"dataset_sha1", bmil::sha1_file(path)}};
  write_text(path + ".manifest.json", manifest.dump(2) + "\n");
  std::printf("wrote %s (%zu episodes, %zu transitions)\n", path.c_str(),
              demos.episodes.size(), demos.total_transitions());
  return 0;
}

int cmd_train(const TrainFlags& f, const CLI::App* sub) {
  if (!f.preset.empty() && !f.env.empty() && f.preset != f.env)
    throw bmil::ConfigError("conflicting keys: --preset=" + f.preset +
                            " vs --env=" + f.env);
  std::string env = !f.env.empty() ? f.env : f.preset;
  const bmil::Mode mode = bmil::mode_from_string(f.mode);

  bmil::TrainConfig cfg;
  if (!f.config_file.empty()) {
    std::ifstream is(f.config_file);
    if (!is) throw bmil::ValidationError("config file not found: " + f.config_file);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    // File may name the env itself; presets seed the defaults.
    json peek = json::parse(text, nullptr, false);
    if (peek.is_object() && peek.contains("env") && env.empty())
      env = peek["env"].get<std::string>();
    if (env.empty()) throw bmil::ConfigError("no environment given (--env/--preset/config)");
    cfg = bmil::config_from_json(text, bmil::preset_config(env, mode));
    if (cfg.env != env)
      throw bmil::ConfigError("conflicting keys: config env=" + cfg.env +
                              " vs requested env=" + env);
  } else {
    if (env.empty()) throw bmil::ConfigError("no environment given (--env/--preset/config)");
    cfg = bmil::preset_config(env, mode);
  }
  cfg.mode = mode;
  cfg.seed = f.seed;
  // Explicit flags override both preset and file.
  if (sub->count("--epochs")) cfg.n_epochs = f.epochs;
  if (sub->count("--policy-steps")) cfg.policy_steps_per_epoch = f.policy_steps;
  if (sub->count("--batch")) cfg.batch_size = f.batch;
  if (sub->count("--pd")) cfg.p_d = f.p_d;
  if (sub->count("--k")) cfg.k_traces = f.k_traces;
  if (sub->count("--model-steps")) cfg.model_steps_per_epoch = f.model_steps;
  if (sub->count("--model-batch")) cfg.model_batch_size = f.model_batch;
  if (sub->count("--horizon")) cfg.schedule = parse_horizon(f.horizon);
  if (sub->count("--strategy")) cfg.strategy = parse_strategy(f.strategy);
  if (f.budget != 1) cfg = bmil::compute_budget_variant(cfg, f.budget);

  if (f.demos.empty()) throw bmil::ConfigError("--demos is required");
  if (!fs::exists(f.demos))
    throw bmil::ValidationError("demo file not found: " + f.demos);

  const bmil::EnvSpec spec = bmil::spec_by_name(env);
  const std::string dir = out_root(f.out);
  const bmil::TrainResult tr = bmil::train_to_dir(spec, cfg, f.demos, dir);
  std::printf("trained %s on %s: %ld policy steps, %ld model steps -> %s\n",
              f.mode.c_str(), env.c_str(), tr.policy_grad_steps, tr.model_grad_steps,
              dir.c_str());
  return 0;
}

int cmd_eval(const std::string& env, const std::string& policy_path,
             const std::string& sampler_kind, int n, const std::string& cells,
             int per_cell, std::uint64_t seed, int workers, const std::string& out_flag,
             const CLI::App* sub) {
  if (sampler_kind == "grid") {
    if (sub->count("--n"))
      throw bmil::ConfigError("conflicting keys: --sampler grid vs --n (use --per-cell)");
  } else if (sub->count("--cells") || sub->count("--per-cell")) {
    throw bmil::ConfigError("conflicting keys: --cells/--per-cell need --sampler grid");
  }
  const bmil::EnvSpec spec = bmil::spec_by_name(env);
  const bmil::Policy policy = bmil::load_policy(policy_path, spec);
  bmil::InitSampler sampler;
  if (sampler_kind == "grid") {
    int cx = 0, cy = 0;
    if (std::sscanf(cells.c_str(), "%dx%d", &cx, &cy) != 2)
      throw bmil::ConfigError("--cells expects CXxCY, e.g. 20x20");
    sampler = bmil::InitSampler::grid(cx, cy, per_cell);
  } else if (sampler_kind == "uniform") {
    sampler = bmil::InitSampler::uniform(n);
  } else if (sampler_kind == "training") {
    sampler = bmil::InitSampler::training(n);
  } else {
    throw bmil::ConfigError("--sampler must be grid, uniform or training");
  }

  const std::string dir = out_root(out_flag);
  fs::create_directories(dir);
  bmil::RobustnessReport rep = bmil::evaluate(policy, spec, sampler, seed, workers);
  rep.method = fs::path(policy_path).stem().string();
  bmil::save_report(rep, (fs::path(dir) / "report.json").string());
  json manifest{{"tool_version", bmil::kToolVersion},
                {"created_utc", utc_now()},
                {"env", env},
                {"policy", policy_path},
                {"policy_sha1", bmil::sha1_file(policy_path)},
                {"sampler", json::parse(bmil::sampler_to_json(sampler))},
                {"seed", std::to_string(seed)},
                {"workers", workers}};
  write_text((fs::path(dir) / "eval_manifest.json").string(), manifest.dump(2) + "\n");
  if (!rep.per_cell.empty()) {
    bmil::write_per_cell_csv(rep, (fs::path(dir) / "per_cell.csv").string());
    bmil::write_heatmap_svg(rep, (fs::path(dir) / "heatmap.svg").string());
  }
  std::printf("success rate %.4f [%.4f, %.4f] over %d trials (%d skipped) -> %s\n",
              rep.overall_rate, rep.ci_low, rep.ci_high, rep.n_trials, rep.n_skipped,
              dir.c_str());
  return 0;
}

int cmd_experiment(const std::string& study, bmil::StudyOptions opt,
                   const std::string& out_flag) {
  const bmil::StudyResult res = bmil::run_study(study, opt, out_root(out_flag));
  std::printf("study %s -> %s%s\n", study.c_str(), res.dir.c_str(),
              res.incomplete ? " (incomplete)" : "");
  for (const auto& a : res.aggregates)
    std::printf("  %-18s seed-mean %.4f  pooled %.4f [%.4f, %.4f]\n", a.method.c_str(),
                a.seed_mean_rate, a.pooled_rate, a.ci_low, a.ci_high);
  if (res.incomplete) {
    for (const auto& r : res.runs)
      if (r.failed) std::printf("  failed: %s: %s\n", r.dir.c_str(), r.error.c_str());
    return kExitRuntime;
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_flag,
               bool heatmaps) {
  std::vector<bmil::RobustnessReport> reports;
  for (const auto& p : inputs) reports.push_back(bmil::load_report(p));
  const std::string dir = out_root(out_flag);
  fs::create_directories(dir);
  bmil::write_comparison_csv(bmil::compare(reports),
                             (fs::path(dir) / "comparison.csv").string());
  if (heatmaps) {
    for (const auto& r : reports) {
      if (r.per_cell.empty()) continue;
      bmil::write_heatmap_svg(r,
                              (fs::path(dir) / ("heatmap_" + r.method + ".svg")).string());
    }
  }
  std::printf("wrote %s/comparison.csv (%zu methods)\n", dir.c_str(), reports.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backwards-model imitation learning laboratory"};
  app.require_subcommand(1);

  // gen-demos
  auto* gen = app.add_subcommand("gen-demos", "Generate expert demonstrations");
  std::string gen_env, gen_out;
  int gen_n = 0, gen_rep = 0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--env", gen_env, "Environment name")->required();
  gen->add_option("--n", gen_n, "Number of demonstrations")->required();
  gen->add_option("--replicate", gen_rep, "Replication factor (default: per-env preset)");
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--out", gen_out, "Output directory");

  // train
  auto* trn = app.add_subcommand("train", "Train a policy");
  TrainFlags tf;
  trn->add_option("--env", tf.env, "Environment name");
  trn->add_option("--preset", tf.preset, "Preset name (an environment name)");
  trn->add_option("--config", tf.config_file, "JSON config file");
  trn->add_option("--demos", tf.demos, "Demo dataset (JSON Lines)");
  trn->add_option("--mode", tf.mode, "bc | bmil | bmil-model-first | fmil");
  trn->add_option("--seed", tf.seed, "Master seed");
  trn->add_option("--epochs", tf.epochs, "Training epochs N");
  trn->add_option("--policy-steps", tf.policy_steps, "Policy steps per epoch M");
  trn->add_option("--batch", tf.batch, "Policy batch size B");
  trn->add_option("--pd", tf.p_d, "Demo sampling probability p_d");
  trn->add_option("--k", tf.k_traces, "Traces per demo state K");
  trn->add_option("--horizon", tf.horizon, "Trace horizon schedule x:y:a:b");
  trn->add_option("--strategy", tf.strategy, "none | resample:<b> | scale:<c>");
  trn->add_option("--model-steps", tf.model_steps, "Model steps per epoch");
  trn->add_option("--model-batch", tf.model_batch, "Model batch size");
  trn->add_option("--budget", tf.budget, "Policy-step budget multiplier");
  trn->add_option("--out", tf.out, "Output directory");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  std::string ev_env, ev_policy, ev_sampler = "uniform", ev_cells = "20x20", ev_out;
  int ev_n = 1000, ev_per_cell = 100, ev_workers = 1;
  std::uint64_t ev_seed = 1;
  ev->add_option("--env", ev_env, "Environment name")->required();
  ev->add_option("--policy", ev_policy, "Policy checkpoint")->required();
  ev->add_option("--sampler", ev_sampler, "grid | uniform | training");
  ev->add_option("--n", ev_n, "Sample count (uniform/training)");
  ev->add_option("--cells", ev_cells, "Grid size CXxCY");
  ev->add_option("--per-cell", ev_per_cell, "Samples per grid cell");
  ev->add_option("--seed", ev_seed, "Evaluation seed");
  ev->add_option("--workers", ev_workers, "Parallel rollout workers");
  ev->add_option("--out", ev_out, "Output directory");

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a multi-seed study");
  std::string ex_study, ex_out, ex_counts, ex_budgets;
  bmil::StudyOptions opt;
  ex->add_option("study", ex_study, "robustness | fwd-vs-bwd | strategy | demo-count | budget | model-first")
      ->required();
  ex->add_option("--env", opt.env, "Environment name");
  ex->add_option("--seeds", opt.n_seeds, "Number of seeds");
  ex->add_option("--base-seed", opt.base_seed, "First seed");
  ex->add_option("--n-eval", opt.n_eval, "Evaluation trials per seed");
  ex->add_option("--workers", opt.n_workers, "Concurrent runs");
  ex->add_option("--counts", ex_counts, "Demo counts, e.g. 3,5,10,20");
  ex->add_option("--budgets", ex_budgets, "Budget multipliers, e.g. 1,2,5");
  ex->add_option("--out", ex_out, "Output directory");

  // report
  auto* rp = app.add_subcommand("report", "Combine saved reports into a comparison");
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  bool rp_heatmaps = false;
  rp->add_option("--inputs", rp_inputs, "Report JSON files")->required()->expected(-1);
  rp->add_flag("--heatmaps", rp_heatmaps, "Also emit heatmap SVGs");
  rp->add_option("--out", rp_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      if (gen_n <= 0) throw bmil::ConfigError("--n must be positive");
      const int rep = gen->count("--replicate")
                          ? gen_rep
                          : bmil::demo_preset(gen_env).replication;
      if (rep < 1) throw bmil::ConfigError("--replicate must be >= 1");
      return cmd_gen_demos(gen_env, gen_n, rep, gen_seed, gen_out);
    }
    if (trn->parsed()) return cmd_train(tf, trn);
    if (ev->parsed())
      return cmd_eval(ev_env, ev_policy, ev_sampler, ev_n, ev_cells, ev_per_cell,
                      ev_seed, ev_workers, ev_out, ev);
    if (ex->parsed()) {
      auto parse_ints = [](const std::string& s) {
        std::vector<int> v;
        int x = 0;
        const char* p = s.c_str();
        char* end = nullptr;
        while (*p) {
          x = static_cast<int>(std::strtol(p, &end, 10));
          if (end == p) throw bmil::ConfigError("bad integer list: " + s);
          v.push_back(x);
          p = (*end == ',') ? end + 1 : end;
        }
        return v;
      };
      if (!ex_counts.empty()) opt.demo_counts = parse_ints(ex_counts);
      if (!ex_budgets.empty()) opt.budgets = parse_ints(ex_budgets);
      return cmd_experiment(ex_study, opt, ex_out);
    }
    if (rp->parsed()) return cmd_report(rp_inputs, rp_out, rp_heatmaps);
  } catch (const bmil::ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const bmil::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const bmil::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitValidation;
  } catch (const bmil::ContractError& e) {
    std::fprintf(stderr, "contract violation: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
