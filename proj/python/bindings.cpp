#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "slicebench/config.hpp"
#include "slicebench/env.hpp"
#include "slicebench/errors.hpp"
#include "slicebench/metrics.hpp"
#include "slicebench/runtime.hpp"
#include "slicebench/toy_env.hpp"

namespace py = pybind11;
using namespace slicebench;

namespace {

py::dict info_dict(const StepInfo& info) {
  py::dict d;
  d["objective"] = info.objective;
  d["compute"] = info.compute;
  d["energy"] = info.energy;
  d["delay"] = info.delay;
  d["admission_rate"] = info.admission_rate;
  d["arrivals"] = info.arrivals;
  d["admitted"] = info.admitted;
  d["served"] = info.served;
  d["sinr_violations"] = info.sinr_violations;
  d["cpu_violations"] = info.cpu_violations;
  d["msr_violations"] = info.msr_violations;
  d["delay_violations"] = info.delay_violations;
  d["unstable_users"] = info.unstable_users;
  d["action_clipped"] = info.action_clipped;
  d["reward_clamped"] = info.reward_clamped;
  py::list slices;
  for (const auto& s : info.slices) {
    py::dict sd;
    sd["admission_rate"] = s.admission_rate;
    sd["latency"] = s.latency;
    sd["cpu_utilization"] = s.cpu_utilization;
    sd["energy"] = s.energy;
    sd["served"] = s.served;
    sd["violations"] = s.violations;
    slices.append(sd);
  }
  d["slices"] = slices;
  return d;
}

py::tuple step_tuple(const StepOutcome& out) {
  return py::make_tuple(out.observation, out.reward, out.done, out.time_limit, info_dict(out.info));
}

config::ExperimentConfig resolve(const std::string& preset, const std::string& config_text) {
  return config_text.empty() ? config::preset(preset) : config::parse(config_text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Network slicing environment and actor-critic learners";
  m.attr("__version__") = metrics::code_version();

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
  py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base.ptr());

  m.def("derive_seed", &derive_seed, py::arg("root"), py::arg("label"));
  m.def("preset_config", [](const std::string& name) { return config::serialize(config::preset(name)); },
        py::arg("name"), "Canonical config text of a named preset.");
  m.def("validate_config", [](const std::string& text) { return config::config_hash(config::parse(text)); },
        py::arg("text"), "Parses and validates config text; returns its hash.");
  m.def("normalize_config", [](const std::string& text) { return config::serialize(config::parse(text)); },
        py::arg("text"));

  py::class_<env::SliceEnv>(m, "SliceEnv")
      .def(py::init([](const std::string& preset, const std::string& config_text) {
             return std::make_unique<env::SliceEnv>(resolve(preset, config_text).env);
           }),
           py::arg("preset") = "desk", py::arg("config") = "")
      .def_property_readonly_static("id", [](py::object) { return std::string(env::SliceEnv::kId); })
      .def("reset", &env::SliceEnv::reset, py::arg("seed"))
      .def("step", [](env::SliceEnv& e, const std::vector<double>& a) { return step_tuple(e.step(a)); },
           py::arg("action"))
      .def_property_readonly("observation_size", [](const env::SliceEnv& e) { return e.observation_spec().size(); })
      .def_property_readonly("action_low", [](const env::SliceEnv& e) { return e.action_spec().low; })
      .def_property_readonly("action_high", [](const env::SliceEnv& e) { return e.action_spec().high; })
      .def_property_readonly("episode_length", &env::SliceEnv::episode_length)
      .def("from_unit", [](const env::SliceEnv& e, const std::vector<double>& u) { return e.action_spec().from_unit(u); },
           py::arg("unit"));

  py::class_<ToyMdp>(m, "ToyMdp")
      .def(py::init<>())
      .def("reset", &ToyMdp::reset, py::arg("seed"))
      .def("step", [](ToyMdp& e, const std::vector<double>& a) { return step_tuple(e.step(a)); }, py::arg("action"))
      .def_property_readonly("state", &ToyMdp::current_state);

  m.def(
      "train",
      [](const std::string& preset, const std::string& config_text, const std::string& agent_name,
         std::uint64_t seed, std::uint64_t timesteps, const std::string& out_dir) {
        auto cfg = resolve(preset, config_text);
        if (!agent_name.empty()) cfg.agent = config::parse_agent(agent_name);
        cfg.runtime.seed = seed;
        if (timesteps) cfg.runtime.total_timesteps = timesteps;
        cfg.validate();
        env::SliceEnv probe(cfg.env);
        auto agent = config::make_agent(cfg, probe.observation_spec().size(), probe.action_spec().size(), seed);
        std::unique_ptr<metrics::CsvRecorder> recorder;
        std::vector<std::string> names;
        for (const auto& s : cfg.env.slices) names.push_back(s.name);
        if (!out_dir.empty()) recorder = std::make_unique<metrics::CsvRecorder>(out_dir, names);
        const auto envcfg = cfg.env;
        runtime::RunResult result;
        {
          py::gil_scoped_release release;
          result = runtime::run(config::run_config(cfg), *agent,
                                [envcfg] { return std::make_unique<env::SliceEnv>(envcfg); }, recorder.get());
        }
        if (recorder) {
          recorder->flush();
          metrics::save_checkpoint(std::filesystem::path(out_dir) / "checkpoint.bin", *agent);
          metrics::write_manifest(out_dir, cfg, result);
        }
        py::list evals;
        for (const auto& e : result.evals) {
          py::dict d;
          d["timestep"] = e.timestep;
          d["score"] = e.result.score;
          d["returns"] = e.result.returns;
          evals.append(d);
        }
        py::dict out;
        out["evals"] = evals;
        out["env_steps"] = result.env_steps;
        out["episodes"] = result.episodes;
        out["critic_updates"] = result.critic_updates;
        out["actor_updates"] = result.actor_updates;
        out["torn_snapshots"] = result.torn_snapshots;
        out["config_hash"] = config::config_hash(cfg);
        return out;
      },
      py::arg("preset") = "desk", py::arg("config") = "", py::arg("agent") = "", py::arg("seed") = 0,
      py::arg("timesteps") = 0, py::arg("out_dir") = "");
}
