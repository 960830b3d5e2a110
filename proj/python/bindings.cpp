#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bmil/backmodel.hpp"
#include "bmil/demgen.hpp"
#include "bmil/envsim.hpp"
#include "bmil/evalharness.hpp"
#include "bmil/imitation.hpp"
#include "bmil/study.hpp"

namespace py = pybind11;
using namespace bmil;

namespace {

PerturbStrategy strategy_from_string(const std::string& text) {
  if (text == "none") return PerturbStrategy::none();
  double coef = 0.0;
  if (std::sscanf(text.c_str(), "resample:%lf", &coef) == 1)
    return PerturbStrategy::resample(coef);
  if (std::sscanf(text.c_str(), "scale:%lf", &coef) == 1)
    return PerturbStrategy::scale(coef);
  throw ConfigError("strategy must be none, resample:<b> or scale:<c>");
}

std::string strategy_to_string(const PerturbStrategy& s) {
  switch (s.kind) {
    case PerturbKind::none: return "none";
    case PerturbKind::resample: return "resample:" + std::to_string(s.coef);
    case PerturbKind::scale: return "scale:" + std::to_string(s.coef);
  }
  return "none";
}

}  // namespace

PYBIND11_MODULE(_bmil, m) {
  m.doc() = "Backwards-model imitation learning core";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ContractError>(m, "ContractError");
  py::register_exception<ValidationError>(m, "ValidationError");
  py::register_exception<ParseError>(m, "ParseFailure");
  py::register_exception<TrainingError>(m, "TrainingError");
  py::register_exception<GenerationError>(m, "GenerationError");
  py::register_exception<ConfigError>(m, "ConfigError");

  py::class_<EnvSpec>(m, "EnvSpec")
      .def_readonly("name", &EnvSpec::name)
      .def_readonly("state_dim", &EnvSpec::state_dim)
      .def_readonly("action_dim", &EnvSpec::action_dim)
      .def_readonly("horizon", &EnvSpec::horizon)
      .def_readonly("dt", &EnvSpec::dt)
      .def_readonly("goal", &EnvSpec::goal)
      .def_readonly("goal_radius", &EnvSpec::goal_radius)
      .def_readonly("init_state", &EnvSpec::init_state)
      .def("to_json", &spec_to_json)
      .def("__repr__", [](const EnvSpec& s) { return "<EnvSpec " + s.name + ">"; });
  m.def("builtin_specs", &builtin_specs);
  m.def("spec_by_name", &spec_by_name, py::arg("name"));
  m.def("spec_from_json", &spec_from_json, py::arg("text"));

  m.def(
      "env_reset",
      [](const EnvSpec& spec, const std::optional<std::vector<double>>& override_state) {
        return env_reset(spec, override_state);
      },
      py::arg("spec"), py::arg("override_state") = py::none());
  m.def(
      "env_step",
      [](const EnvSpec& spec, const std::vector<double>& s, const std::vector<double>& a) {
        const StepResult r = env_step(spec, s, a);
        return py::make_tuple(r.state, r.success);
      },
      py::arg("spec"), py::arg("state"), py::arg("action"));
  m.def(
      "is_success",
      [](const EnvSpec& spec, const std::vector<double>& s) { return is_success(spec, s); },
      py::arg("spec"), py::arg("state"));

  py::class_<DemoSet>(m, "DemoSet")
      .def_readonly("spec_name", &DemoSet::spec_name)
      .def_readonly("replication_factor", &DemoSet::replication_factor)
      .def_property_readonly("n_episodes",
                             [](const DemoSet& d) { return d.episodes.size(); })
      .def_property_readonly("n_transitions",
                             [](const DemoSet& d) { return d.total_transitions(); })
      .def("__repr__", [](const DemoSet& d) {
        return "<DemoSet " + d.spec_name + " episodes=" + std::to_string(d.episodes.size()) + ">";
      });
  m.def("generate_demos", &generate_demos, py::arg("spec"), py::arg("n_demos"),
        py::arg("seed"));
  m.def("replicate_demos", &replicate_demos, py::arg("demos"), py::arg("k"));
  m.def("save_demos", &save_demos, py::arg("demos"), py::arg("path"));
  m.def("load_demos", &load_demos, py::arg("path"));

  m.def(
      "gaussian_nll",
      [](const std::vector<double>& mean, const std::vector<double>& log_std,
         const std::vector<double>& x) {
        return gaussian_nll(DiagGaussian{mean, log_std}, x);
      },
      py::arg("mean"), py::arg("log_std"), py::arg("x"));
  m.def(
      "gaussian_entropy",
      [](const std::vector<double>& mean, const std::vector<double>& log_std) {
        return gaussian_entropy(DiagGaussian{mean, log_std});
      },
      py::arg("mean"), py::arg("log_std"));
  m.def(
      "horizon_at",
      [](int x, int y, int a, int b, int epoch) {
        return horizon_at(HorizonSchedule{x, y, a, b}, epoch);
      },
      py::arg("x"), py::arg("y"), py::arg("a"), py::arg("b"), py::arg("epoch"));
  m.def("wilson_ci", &wilson_ci, py::arg("successes"), py::arg("trials"),
        py::arg("z") = 1.96);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("env", &TrainConfig::env)
      .def_readwrite("n_epochs", &TrainConfig::n_epochs)
      .def_readwrite("policy_steps_per_epoch", &TrainConfig::policy_steps_per_epoch)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("p_d", &TrainConfig::p_d)
      .def_readwrite("k_traces", &TrainConfig::k_traces)
      .def_readwrite("model_steps_per_epoch", &TrainConfig::model_steps_per_epoch)
      .def_readwrite("model_batch_size", &TrainConfig::model_batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_property(
          "mode", [](const TrainConfig& c) { return mode_to_string(c.mode); },
          [](TrainConfig& c, const std::string& s) { c.mode = mode_from_string(s); })
      .def_property(
          "horizon",
          [](const TrainConfig& c) {
            return py::make_tuple(c.schedule.x, c.schedule.y, c.schedule.a, c.schedule.b);
          },
          [](TrainConfig& c, const py::tuple& t) {
            c.schedule = {t[0].cast<int>(), t[1].cast<int>(), t[2].cast<int>(),
                          t[3].cast<int>()};
          })
      .def_property(
          "strategy",
          [](const TrainConfig& c) { return strategy_to_string(c.strategy); },
          [](TrainConfig& c, const std::string& s) { c.strategy = strategy_from_string(s); })
      .def("to_json", &config_to_json);
  m.def(
      "preset_config",
      [](const std::string& env, const std::string& mode) {
        return preset_config(env, mode_from_string(mode));
      },
      py::arg("env"), py::arg("mode"));
  m.def("compute_budget_variant", &compute_budget_variant, py::arg("config"),
        py::arg("multiplier"));

  py::class_<Policy>(m, "Policy")
      .def("act",
           [](const Policy& p, const std::vector<double>& state) {
             return policy_act(p, state);
           })
      .def("__repr__", [](const Policy& p) {
        return "<Policy in=" + std::to_string(p.net.input_dim()) + ">";
      });
  m.def("save_policy", &save_policy, py::arg("policy"), py::arg("path"));
  m.def("load_policy", &load_policy, py::arg("path"), py::arg("spec"));

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("policy", &TrainResult::policy)
      .def_readonly("policy_grad_steps", &TrainResult::policy_grad_steps)
      .def_readonly("model_grad_steps", &TrainResult::model_grad_steps)
      .def_property_readonly("log", [](const TrainResult& r) {
        py::list rows;
        for (const auto& e : r.log) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["model_loss"] = e.model_loss;
          d["policy_loss"] = e.policy_loss;
          d["horizon"] = e.horizon;
          d["trace_pairs"] = e.trace_pairs;
          d["wall_seconds"] = e.wall_seconds;
          rows.append(d);
        }
        return rows;
      });
  m.def("train", &train, py::arg("config"), py::arg("spec"), py::arg("demos"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<InitSampler>(m, "InitSampler")
      .def_static("grid", &InitSampler::grid, py::arg("cells_x"), py::arg("cells_y"),
                  py::arg("samples_per_cell"))
      .def_static("uniform", &InitSampler::uniform, py::arg("n"))
      .def_static("training", &InitSampler::training, py::arg("n"));

  py::class_<RobustnessReport>(m, "RobustnessReport")
      .def_readonly("method", &RobustnessReport::method)
      .def_readonly("env", &RobustnessReport::env)
      .def_readonly("overall_rate", &RobustnessReport::overall_rate)
      .def_readonly("ci_low", &RobustnessReport::ci_low)
      .def_readonly("ci_high", &RobustnessReport::ci_high)
      .def_readonly("n_trials", &RobustnessReport::n_trials)
      .def_readonly("n_success", &RobustnessReport::n_success)
      .def_readonly("n_skipped", &RobustnessReport::n_skipped)
      .def("to_json", &report_to_json)
      .def("__repr__", [](const RobustnessReport& r) {
        return "<RobustnessReport " + r.method + " rate=" + std::to_string(r.overall_rate) + ">";
      });
  m.def("evaluate", &evaluate, py::arg("policy"), py::arg("spec"), py::arg("sampler"),
        py::arg("seed"), py::arg("n_workers") = 1,
        py::call_guard<py::gil_scoped_release>());

  m.def(
      "rollout",
      [](const Policy& p, const EnvSpec& spec, const std::vector<double>& init) {
        const RolloutResult r = rollout(p, spec, init);
        return py::make_tuple(r.success, r.steps_used);
      },
      py::arg("policy"), py::arg("spec"), py::arg("init_state"));
}
