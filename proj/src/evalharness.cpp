#include "bmil/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

namespace bmil {

namespace {

using json = nlohmann::json;

constexpr int kMaxPlacementTries = 100;

struct TrialOutcome {
  bool skipped = false;
  bool success = false;
  int cell = -1;
};

Box default_velocity_noise() { return {{-0.1, -0.1}, {0.1, 0.1}}; }

// Position box of one grid cell inside the eval region.
void cell_bounds(const EnvSpec& spec, const InitSampler& s, int cell, double* lo, double* hi) {
  const int ix = cell % s.cells_x;
  const int iy = cell / s.cells_x;
  const auto& r = spec.eval_region;
  for (int d = 0; d < 2; ++d) {
    const int i = d == 0 ? ix : iy;
    const int n = d == 0 ? s.cells_x : s.cells_y;
    const double w = (r.hi[d] - r.lo[d]) / n;
    lo[d] = r.lo[d] + i * w;
    hi[d] = lo[d] + w;
  }
}

TrialOutcome run_trial(const Policy& policy, const EnvSpec& spec,
                       const InitSampler& sampler, int trial_index,
                       int n_per_cell_total, Rng trial_rng) {
  TrialOutcome out;
  double lo[2], hi[2];
  switch (sampler.kind) {
    case InitSampler::Kind::grid: {
      out.cell = trial_index / n_per_cell_total;
      cell_bounds(spec, sampler, out.cell, lo, hi);
      break;
    }
    case InitSampler::Kind::uniform: {
      const Box& r = sampler.region.dim() == 2 ? sampler.region : spec.eval_region;
      lo[0] = r.lo[0]; lo[1] = r.lo[1];
      hi[0] = r.hi[0]; hi[1] = r.hi[1];
      break;
    }
    case InitSampler::Kind::training: {
      lo[0] = spec.init_region.lo[0]; lo[1] = spec.init_region.lo[1];
      hi[0] = spec.init_region.hi[0]; hi[1] = spec.init_region.hi[1];
      break;
    }
  }

  std::vector<double> pos(2);
  bool placed = false;
  for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
    pos[0] = trial_rng.uniform(lo[0], hi[0]);
    pos[1] = trial_rng.uniform(lo[1], hi[1]);
    if (!in_any_wall(spec, pos[0], pos[1])) {
      placed = true;
      break;
    }
  }
  if (!placed) {
    out.skipped = true;
    return out;
  }

  std::vector<double> vel;
  if (spec.task == Task::maze && sampler.kind != InitSampler::Kind::training) {
    const Box noise =
        sampler.velocity_noise.dim() == 2 ? sampler.velocity_noise : default_velocity_noise();
    vel = {trial_rng.uniform(noise.lo[0], noise.hi[0]),
           trial_rng.uniform(noise.lo[1], noise.hi[1])};
  }
  const auto start = state_at(spec, pos, vel);
  out.success = rollout(policy, spec, start).success;
  return out;
}

std::string f64_json(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

InitSampler InitSampler::grid(int cx, int cy, int per_cell) {
  if (cx <= 0 || cy <= 0 || per_cell <= 0)
    throw ContractError("grid sampler needs positive cell counts");
  InitSampler s;
  s.kind = Kind::grid;
  s.cells_x = cx;
  s.cells_y = cy;
  s.samples_per_cell = per_cell;
  return s;
}

InitSampler InitSampler::uniform(int n) {
  if (n <= 0) throw ContractError("uniform sampler needs positive sample count");
  InitSampler s;
  s.kind = Kind::uniform;
  s.n_samples = n;
  return s;
}

InitSampler InitSampler::uniform_in(const Box& region, int n) {
  InitSampler s = uniform(n);
  if (region.dim() != 2) throw ContractError("uniform sampler region must be 2d");
  s.region = region;
  return s;
}

InitSampler InitSampler::training(int n) {
  if (n <= 0) throw ContractError("training sampler needs positive sample count");
  InitSampler s;
  s.kind = Kind::training;
  s.n_samples = n;
  return s;
}

RolloutResult rollout(const Policy& policy, const EnvSpec& spec,
                      const std::vector<double>& init_state) {
  std::vector<double> state = env_reset(spec, init_state);
  if (is_success(spec, state)) return {true, 0};
  for (int t = 1; t <= spec.horizon; ++t) {
    const auto action = policy_act(policy, state);
    StepResult r = env_step(spec, state, action);
    state = std::move(r.state);
    if (r.success) return {true, t};
  }
  return {false, spec.horizon};
}

std::pair<double, double> wilson_ci(int successes, int trials, double z) {
  if (trials < 1 || successes < 0 || successes > trials)
    throw ContractError("wilson_ci: need 0 <= successes <= trials, trials >= 1");
  const double n = trials;
  const double p = successes / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

RobustnessReport evaluate(const Policy& policy, const EnvSpec& spec,
                          const InitSampler& sampler, std::uint64_t seed,
                          int n_workers) {
  int n_trials_requested = 0;
  int per_cell_total = 1;
  if (sampler.kind == InitSampler::Kind::grid) {
    per_cell_total = sampler.samples_per_cell;
    n_trials_requested = sampler.cells_x * sampler.cells_y * sampler.samples_per_cell;
  } else {
    n_trials_requested = sampler.n_samples;
  }
  if (n_trials_requested <= 0) throw ContractError("evaluate: no trials requested");
  if (n_workers < 1) n_workers = 1;

  const Rng eval_stream = Rng::stream(seed, "eval");
  std::vector<TrialOutcome> outcomes(n_trials_requested);
  auto work = [&](int worker) {
    for (int t = worker; t < n_trials_requested; t += n_workers)
      outcomes[t] = run_trial(policy, spec, sampler, t, per_cell_total,
                              eval_stream.split(static_cast<std::uint64_t>(t)));
  };
  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(work, w);
    for (auto& th : threads) th.join();
  }

  RobustnessReport rep;
  rep.env = spec.name;
  rep.seed = seed;
  if (sampler.kind == InitSampler::Kind::grid) {
    rep.cells_x = sampler.cells_x;
    rep.cells_y = sampler.cells_y;
    rep.per_cell.assign(static_cast<std::size_t>(sampler.cells_x) * sampler.cells_y, {});
  }
  for (const auto& o : outcomes) {
    if (o.skipped) {
      ++rep.n_skipped;
      continue;
    }
    ++rep.n_trials;
    rep.n_success += o.success ? 1 : 0;
    if (o.cell >= 0) {
      rep.per_cell[o.cell].trials += 1;
      rep.per_cell[o.cell].successes += o.success ? 1 : 0;
    }
  }
  if (rep.n_trials == 0)
    throw ConfigError("evaluate: every sampled start position was wall-blocked");
  rep.overall_rate = static_cast<double>(rep.n_success) / rep.n_trials;
  std::tie(rep.ci_low, rep.ci_high) = wilson_ci(rep.n_success, rep.n_trials);
  return rep;
}

std::vector<ComparisonRow> compare(const std::vector<RobustnessReport>& reports) {
  if (reports.empty()) throw ContractError("compare: no reports");
  for (const auto& r : reports)
    if (r.env != reports.front().env)
      throw ValidationError("compare: reports are for different environments");
  const RobustnessReport* bc = nullptr;
  for (const auto& r : reports)
    if (r.method == "bc") bc = &r;
  if (!bc) throw ValidationError("compare: no 'bc' baseline report");
  std::vector<ComparisonRow> rows;
  for (const auto& r : reports) {
    ComparisonRow row;
    row.method = r.method;
    row.rate = r.overall_rate;
    row.ci_low = r.ci_low;
    row.ci_high = r.ci_high;
    row.ratio_to_bc =
        bc->overall_rate > 0.0 ? r.overall_rate / bc->overall_rate
                               : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

std::string report_to_json(const RobustnessReport& r) {
  json cells = json::array();
  for (const auto& c : r.per_cell)
    cells.push_back({{"successes", c.successes}, {"trials", c.trials}});
  json j{{"method", r.method},
         {"env", r.env},
         {"seed", std::to_string(r.seed)},
         {"overall_rate", f64_json(r.overall_rate)},
         {"ci_low", f64_json(r.ci_low)},
         {"ci_high", f64_json(r.ci_high)},
         {"n_trials", r.n_trials},
         {"n_success", r.n_success},
         {"n_skipped", r.n_skipped},
         {"cells_x", r.cells_x},
         {"cells_y", r.cells_y},
         {"per_cell", cells}};
  return j.dump(2);
}

RobustnessReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RobustnessReport r;
    r.method = j.at("method").get<std::string>();
    r.env = j.at("env").get<std::string>();
    r.seed = std::strtoull(j.at("seed").get<std::string>().c_str(), nullptr, 10);
    r.overall_rate = std::strtod(j.at("overall_rate").get<std::string>().c_str(), nullptr);
    r.ci_low = std::strtod(j.at("ci_low").get<std::string>().c_str(), nullptr);
    r.ci_high = std::strtod(j.at("ci_high").get<std::string>().c_str(), nullptr);
    r.n_trials = j.at("n_trials").get<int>();
    r.n_success = j.at("n_success").get<int>();
    r.n_skipped = j.at("n_skipped").get<int>();
    r.cells_x = j.at("cells_x").get<int>();
    r.cells_y = j.at("cells_y").get<int>();
    for (const auto& c : j.at("per_cell"))
      r.per_cell.push_back({c.at("successes").get<int>(), c.at("trials").get<int>()});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report json: ") + e.what());
  }
}

void save_report(const RobustnessReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open report for writing: " + path);
  os << report_to_json(report) << "\n";
}

RobustnessReport load_report(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open report: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return report_from_json(text);
}

void write_per_cell_csv(const RobustnessReport& r, const std::string& path) {
  if (r.per_cell.empty()) throw ContractError("per-cell CSV needs a grid report");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open csv for writing: " + path);
  os << "row,col,successes,trials,rate\n";
  char buf[128];
  for (int iy = 0; iy < r.cells_y; ++iy) {
    for (int ix = 0; ix < r.cells_x; ++ix) {
      const auto& c = r.per_cell[static_cast<std::size_t>(iy) * r.cells_x + ix];
      const double rate = c.trials > 0 ? static_cast<double>(c.successes) / c.trials : 0.0;
      std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%.17g\n", iy, ix, c.successes,
                    c.trials, rate);
      os << buf;
    }
  }
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open csv for writing: " + path);
  os << "method,rate,ci_low,ci_high,ratio_to_bc\n";
  char buf[192];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n", r.method.c_str(),
                  r.rate, r.ci_low, r.ci_high, r.ratio_to_bc);
    os << buf;
  }
}

namespace {

// Five-stop viridis-like ramp from dark purple to bright yellow.
void ramp_color(double v, int* rgb) {
  static const int stops[5][3] = {
      {0x44, 0x01, 0x54}, {0x3b, 0x52, 0x8b}, {0x21, 0x91, 0x8c},
      {0x5e, 0xc9, 0x62}, {0xfd, 0xe7, 0x25}};
  v = std::clamp(v, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(v));
  const double f = v - i;
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
}

}  // namespace

std::string heatmap_svg(const RobustnessReport& r) {
  if (r.per_cell.empty()) throw ContractError("heatmap needs a grid report");
  const int px = 24;
  const int w = r.cells_x * px, h = r.cells_y * px;
  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                w, h, w, h);
  svg += buf;
  for (int iy = 0; iy < r.cells_y; ++iy) {
    for (int ix = 0; ix < r.cells_x; ++ix) {
      const auto& c = r.per_cell[static_cast<std::size_t>(iy) * r.cells_x + ix];
      char color[16];
      if (c.trials == 0) {
        std::snprintf(color, sizeof(color), "#808080");  // wall / skipped cell
      } else {
        int rgb[3];
        ramp_color(static_cast<double>(c.successes) / c.trials, rgb);
        std::snprintf(color, sizeof(color), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
      }
      // Row 0 sits at the region's low y, so draw bottom-up.
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n",
                    ix * px, (r.cells_y - 1 - iy) * px, px, px, color);
      svg += buf;
    }
  }
  svg += "</svg>\n";
  return svg;
}

void write_heatmap_svg(const RobustnessReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open svg for writing: " + path);
  os << heatmap_svg(report);
}

}  // namespace bmil
