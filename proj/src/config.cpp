#include "slicebench/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "slicebench/errors.hpp"
#include "slicebench/rng.hpp"

namespace slicebench::config {

namespace {

// ---------------------------------------------------------------- enum names

std::string_view activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::kLinear: return "linear";
    case nn::Activation::kRelu: return "relu";
    case nn::Activation::kGelu: return "gelu";
    case nn::Activation::kTanh: return "tanh";
  }
  return "linear";
}

nn::Activation parse_activation(const std::string& s, const std::string& key) {
  if (s == "linear") return nn::Activation::kLinear;
  if (s == "relu") return nn::Activation::kRelu;
  if (s == "gelu") return nn::Activation::kGelu;
  if (s == "tanh") return nn::Activation::kTanh;
  throw ConfigError("config key '" + key + "': unknown activation '" + s + "'");
}

std::string_view noise_name(agent::NoiseKind k) {
  return k == agent::NoiseKind::kGaussian ? "gaussian" : "ou";
}

agent::NoiseKind parse_noise(const std::string& s, const std::string& key) {
  if (s == "gaussian") return agent::NoiseKind::kGaussian;
  if (s == "ou") return agent::NoiseKind::kOrnsteinUhlenbeck;
  throw ConfigError("config key '" + key + "': unknown noise kind '" + s + "'");
}

std::string_view transform_name(agent::PriorityTransform t) {
  return t == agent::PriorityTransform::kNll ? "nll" : "nll_excess";
}

agent::PriorityTransform parse_transform(const std::string& s, const std::string& key) {
  if (s == "nll") return agent::PriorityTransform::kNll;
  if (s == "nll_excess") return agent::PriorityTransform::kNllExcess;
  throw ConfigError("config key '" + key + "': unknown priority transform '" + s + "'");
}

std::string_view shard_name(replay::ShardPolicy p) {
  return p == replay::ShardPolicy::kRoundRobin ? "round_robin" : "random";
}

replay::ShardPolicy parse_shard(const std::string& s, const std::string& key) {
  if (s == "round_robin") return replay::ShardPolicy::kRoundRobin;
  if (s == "random") return replay::ShardPolicy::kRandom;
  throw ConfigError("config key '" + key + "': unknown shard policy '" + s + "'");
}

// ---------------------------------------------------------------- reading

/// Mapping view that insists every requested key exists and, on finish(),
/// that no other keys are present.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) throw ConfigError("config key '" + display() + "' must be a mapping");
  }

  Section section(const std::string& key) { return Section(require(key), join(key)); }

  YAML::Node require(const std::string& key) {
    seen_.insert(key);
    const YAML::Node child = node_[key];
    if (!child) throw ConfigError("missing config key '" + join(key) + "'");
    return child;
  }

  double real(const std::string& key) {
    const YAML::Node n = require(key);
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config key '" + join(key) + "' must be a number");
    }
  }

  std::uint64_t count(const std::string& key) { return to_count(require(key), join(key)); }

  bool flag(const std::string& key) {
    const YAML::Node n = require(key);
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config key '" + join(key) + "' must be true or false");
    }
  }

  std::string text(const std::string& key) {
    const YAML::Node n = require(key);
    if (!n.IsScalar()) throw ConfigError("config key '" + join(key) + "' must be a string");
    return n.Scalar();
  }

  std::vector<std::size_t> counts(const std::string& key) {
    const YAML::Node n = require(key);
    if (!n.IsSequence()) throw ConfigError("config key '" + join(key) + "' must be a list");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n.size(); ++i)
      out.push_back(static_cast<std::size_t>(to_count(n[i], join(key) + "[" + std::to_string(i) + "]")));
    return out;
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + join(key) + "'");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  static std::uint64_t to_count(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) throw ConfigError("config key '" + key + "' must be a non-negative integer");
    const std::string& s = n.Scalar();
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    double d = 0.0;
    try {
      d = n.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    if (!(d >= 0.0) || d != std::floor(d) || d > 9.0e15)
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return static_cast<std::uint64_t>(d);
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

env::EnvConfig read_env(Section s) {
  env::EnvConfig e;
  {
    Section t = s.section("topology");
    e.n_aps = t.count("n_aps");
    e.n_subscribers = t.count("n_subscribers");
    e.area_side = t.real("area_side");
    e.pathloss_exponent = t.real("pathloss_exponent");
    e.reference_gain = t.real("reference_gain");
    t.finish();
  }
  {
    Section r = s.section("radio");
    e.radio.regularizer_noise = r.real("regularizer_noise");
    e.radio.receiver_noise = r.real("receiver_noise");
    e.radio.snr_gap = r.real("snr_gap");
    e.max_power = r.real("max_power");
    r.finish();
  }
  {
    Section c = s.section("compute");
    e.compute.theta_hat = c.real("theta_hat");
    e.compute.c_b = c.real("c_b");
    e.compute.delta = c.real("delta");
    e.compute.core_capacity = c.real("core_capacity");
    e.compute.cores_per_vnf = c.count("cores_per_vnf");
    e.compute.total_cpu = c.real("total_cpu");
    c.finish();
  }
  {
    Section en = s.section("energy");
    e.energy.iota = en.real("iota");
    e.energy.p_z = en.real("p_z");
    e.energy.psi = en.real("psi");
    e.energy.fronthaul_power = en.real("fronthaul_power");
    e.energy.circuit_power = en.real("circuit_power");
    en.finish();
  }
  {
    Section q = s.section("queues");
    e.vnf_boot_delay = q.real("vnf_boot_delay");
    e.service_per_cpu = q.real("service_per_cpu");
    e.tx_scale = q.real("tx_scale");
    e.tx_cap = q.real("tx_cap");
    e.unstable_delay = q.real("unstable_delay");
    q.finish();
  }
  {
    Section d = s.section("dynamics");
    e.max_cpu_step = d.real("max_cpu_step");
    e.mean_holding_time = d.real("mean_holding_time");
    e.episode_length = d.count("episode_length");
    d.finish();
  }
  {
    Section p = s.section("penalties");
    e.penalties.rho_sinr = p.real("sinr");
    e.penalties.rho_cpu = p.real("cpu");
    e.penalties.rho_msr = p.real("msr");
    e.penalties.rho_delay = p.real("delay");
    p.finish();
  }
  {
    Section w = s.section("weights");
    e.weights.w1 = w.real("compute");
    e.weights.w2 = w.real("energy");
    e.weights.w3 = w.real("delay");
    e.weights.w4 = w.real("reward_scale");
    w.finish();
  }
  const YAML::Node list = s.require("slices");
  if (!list.IsSequence()) throw ConfigError("config key '" + s.join("slices") + "' must be a list");
  for (std::size_t i = 0; i < list.size(); ++i) {
    Section sl(list[i], s.join("slices") + "[" + std::to_string(i) + "]");
    env::SliceConfig c;
    c.name = sl.text("name");
    c.sinr_threshold = sl.real("sinr_threshold");
    c.cpu_threshold = sl.real("cpu_threshold");
    c.delay_budget = sl.real("delay_budget");
    c.arrival_rate = sl.real("arrival_rate");
    c.packet_rate = sl.real("packet_rate");
    c.max_users = sl.count("max_users");
    c.initial_cpu = sl.real("initial_cpu");
    sl.finish();
    e.slices.push_back(std::move(c));
  }
  s.finish();
  return e;
}

agent::DTd3Config read_dtd3(Section s) {
  agent::DTd3Config c;
  c.hidden = s.counts("hidden");
  c.activation = parse_activation(s.text("activation"), s.join("activation"));
  c.gamma = s.real("gamma");
  c.tau = s.real("tau");
  c.exploration_noise = s.real("exploration_noise");
  c.smoothing_noise = s.real("smoothing_noise");
  c.smoothing_clip = s.real("smoothing_clip");
  c.clip_boundary = s.real("clip_boundary");
  c.policy_freq = s.count("policy_freq");
  c.batch_size = s.count("batch_size");
  c.actor_lr = s.real("actor_lr");
  c.critic_lr = s.real("critic_lr");
  c.reward_scale = s.real("reward_scale");
  c.target_samples = s.count("target_samples");
  c.initial_sigma = s.real("initial_sigma");
  c.priority_transform = parse_transform(s.text("priority_transform"), s.join("priority_transform"));
  s.finish();
  return c;
}

agent::Td3Config read_td3(Section s) {
  agent::Td3Config c;
  c.hidden = s.counts("hidden");
  c.activation = parse_activation(s.text("activation"), s.join("activation"));
  c.gamma = s.real("gamma");
  c.tau = s.real("tau");
  c.exploration_noise = s.real("exploration_noise");
  c.smoothing_noise = s.real("smoothing_noise");
  c.smoothing_clip = s.real("smoothing_clip");
  c.policy_freq = s.count("policy_freq");
  c.batch_size = s.count("batch_size");
  c.actor_lr = s.real("actor_lr");
  c.critic_lr = s.real("critic_lr");
  c.reward_scale = s.real("reward_scale");
  s.finish();
  return c;
}

agent::DdpgConfig read_ddpg(Section s) {
  agent::DdpgConfig c;
  c.hidden = s.counts("hidden");
  c.activation = parse_activation(s.text("activation"), s.join("activation"));
  c.gamma = s.real("gamma");
  c.tau = s.real("tau");
  c.noise = parse_noise(s.text("noise"), s.join("noise"));
  c.noise_sigma = s.real("noise_sigma");
  c.ou_theta = s.real("ou_theta");
  c.batch_size = s.count("batch_size");
  c.actor_lr = s.real("actor_lr");
  c.critic_lr = s.real("critic_lr");
  c.reward_scale = s.real("reward_scale");
  s.finish();
  return c;
}

runtime::RunConfig read_runtime(Section s) {
  runtime::RunConfig r;
  r.total_timesteps = s.count("total_timesteps");
  r.start_timesteps = s.count("start_timesteps");
  r.eval_interval = s.count("eval_interval");
  r.eval_episodes = s.count("eval_episodes");
  r.eval_top_k = s.count("eval_top_k");
  r.mode = parse_mode(s.text("mode"));
  r.actors = s.count("actors");
  r.buffers = s.count("buffers");
  r.learners = s.count("learners");
  r.lockstep = s.flag("lockstep");
  r.snapshot_refresh = s.count("snapshot_refresh");
  r.replay_capacity = s.count("replay_capacity");
  r.priority_alpha = s.real("priority_alpha");
  r.priority_beta0 = s.real("priority_beta0");
  r.shard_policy = parse_shard(s.text("shard_policy"), s.join("shard_policy"));
  r.seed = s.count("seed");
  s.finish();
  return r;
}

// ---------------------------------------------------------------- writing

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, p);
  // Keep a decimal marker so the value reads back as floating point in any tool.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string list(const std::vector<std::size_t>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

class Writer {
 public:
  void open(const std::string& key) { line(key + ":"); ++depth_; }
  void close() { --depth_; }
  void kv(const std::string& key, const std::string& value) { line(key + ": " + value); }
  void kv(const std::string& key, double value) { kv(key, num(value)); }
  void kv(const std::string& key, std::uint64_t value) { kv(key, std::to_string(value)); }
  void kv(const std::string& key, bool value) { kv(key, std::string(value ? "true" : "false")); }
  void raw(const std::string& text) { line(text); }
  void indent(int n) { depth_ += n; }
  std::string str() const { return out_.str(); }

 private:
  void line(const std::string& s) { out_ << std::string(2 * static_cast<std::size_t>(depth_), ' ') << s << '\n'; }
  std::ostringstream out_;
  int depth_ = 0;
};

std::uint64_t u(std::size_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kDTd3: return "dtd3";
    case AgentKind::kTd3: return "td3";
    case AgentKind::kDdpg: return "ddpg";
  }
  return "dtd3";
}

AgentKind parse_agent(std::string_view name) {
  if (name == "dtd3") return AgentKind::kDTd3;
  if (name == "td3") return AgentKind::kTd3;
  if (name == "ddpg") return AgentKind::kDdpg;
  throw ConfigError("unknown agent '" + std::string(name) + "' (expected dtd3, td3 or ddpg)");
}

std::string_view to_string(runtime::Mode mode) { return mode == runtime::Mode::kSync ? "sync" : "async"; }

runtime::Mode parse_mode(std::string_view name) {
  if (name == "sync") return runtime::Mode::kSync;
  if (name == "async") return runtime::Mode::kAsync;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected sync or async)");
}

void ExperimentConfig::validate() const {
  env.validate();
  dtd3.validate();
  td3.validate();
  ddpg.validate();
  runtime.validate();
}

ExperimentConfig desk_preset() {
  ExperimentConfig c;
  c.preset = "desk";
  auto& e = c.env;
  e.n_aps = 16;
  e.n_subscribers = 8;
  e.area_side = 100.0;
  e.pathloss_exponent = 3.5;
  e.reference_gain = 1e-3;
  e.radio = {1e-9, 1e-9, 1.0};
  e.max_power = 1.0;
  e.compute = {2.0, 4.0, 0.5, 20.0, 2, 300.0};
  e.energy = {1e-26, 1e9, 1.0, 0.0, 0.0};
  e.vnf_boot_delay = 20.0;
  e.service_per_cpu = 0.1;
  e.tx_scale = 1.0;
  e.tx_cap = 10.0;
  e.unstable_delay = 100.0;
  e.max_cpu_step = 30.0;
  e.mean_holding_time = 10.0;
  e.episode_length = 50;
  e.penalties = {0.5, 0.3, 0.1, 0.05};
  e.weights = {1.0, 2.0, 1.0, 100.0};
  e.slices = {
      {"A", 10.0, 30.0, 30.0, 0.2, 0.5, 2, 50.0},
      {"B", 5.0, 24.0, 65.0, 0.4, 1.0, 3, 50.0},
      {"C", 3.0, 22.0, 70.0, 0.4, 1.0, 3, 50.0},
  };
  c.runtime.total_timesteps = 100000;
  c.runtime.start_timesteps = 10000;
  c.runtime.eval_interval = 20000;
  c.runtime.replay_capacity = 1000000;
  return c;
}

ExperimentConfig paper_preset() {
  ExperimentConfig c = desk_preset();
  c.preset = "paper";
  auto& e = c.env;
  e.n_aps = 150;
  e.n_subscribers = 50;
  e.area_side = 300.0;
  e.compute = {2.0, 4.0, 0.05, 20.0, 2, 1500.0};
  e.max_cpu_step = 150.0;
  e.slices = {
      {"A", 10.0, 30.0, 30.0, 1.0, 0.5, 10, 250.0},
      {"B", 5.0, 24.0, 65.0, 2.0, 1.0, 20, 500.0},
      {"C", 3.0, 22.0, 70.0, 2.0, 1.0, 20, 500.0},
  };
  c.runtime.total_timesteps = 2000000;
  c.runtime.start_timesteps = 25000;
  return c;
}

ExperimentConfig preset(std::string_view name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected paper or desk)");
}

ExperimentConfig parse(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("config is empty");
  Section s(root, "");
  ExperimentConfig c;
  c.preset = s.text("preset");
  c.agent = parse_agent(s.text("agent"));
  c.env = read_env(s.section("env"));
  {
    Section a = s.section("agents");
    c.dtd3 = read_dtd3(a.section("dtd3"));
    c.td3 = read_td3(a.section("td3"));
    c.ddpg = read_ddpg(a.section("ddpg"));
    a.finish();
  }
  c.runtime = read_runtime(s.section("runtime"));
  s.finish();
  c.validate();
  return c;
}

ExperimentConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string serialize(const ExperimentConfig& c) {
  Writer w;
  w.kv("preset", quoted(c.preset));
  w.kv("agent", std::string(to_string(c.agent)));
  const auto& e = c.env;
  w.open("env");
  w.open("topology");
  w.kv("n_aps", u(e.n_aps));
  w.kv("n_subscribers", u(e.n_subscribers));
  w.kv("area_side", e.area_side);
  w.kv("pathloss_exponent", e.pathloss_exponent);
  w.kv("reference_gain", e.reference_gain);
  w.close();
  w.open("radio");
  w.kv("regularizer_noise", e.radio.regularizer_noise);
  w.kv("receiver_noise", e.radio.receiver_noise);
  w.kv("snr_gap", e.radio.snr_gap);
  w.kv("max_power", e.max_power);
  w.close();
  w.open("compute");
  w.kv("theta_hat", e.compute.theta_hat);
  w.kv("c_b", e.compute.c_b);
  w.kv("delta", e.compute.delta);
  w.kv("core_capacity", e.compute.core_capacity);
  w.kv("cores_per_vnf", u(e.compute.cores_per_vnf));
  w.kv("total_cpu", e.compute.total_cpu);
  w.close();
  w.open("energy");
  w.kv("iota", e.energy.iota);
  w.kv("p_z", e.energy.p_z);
  w.kv("psi", e.energy.psi);
  w.kv("fronthaul_power", e.energy.fronthaul_power);
  w.kv("circuit_power", e.energy.circuit_power);
  w.close();
  w.open("queues");
  w.kv("vnf_boot_delay", e.vnf_boot_delay);
  w.kv("service_per_cpu", e.service_per_cpu);
  w.kv("tx_scale", e.tx_scale);
  w.kv("tx_cap", e.tx_cap);
  w.kv("unstable_delay", e.unstable_delay);
  w.close();
  w.open("dynamics");
  w.kv("max_cpu_step", e.max_cpu_step);
  w.kv("mean_holding_time", e.mean_holding_time);
  w.kv("episode_length", u(e.episode_length));
  w.close();
  w.open("penalties");
  w.kv("sinr", e.penalties.rho_sinr);
  w.kv("cpu", e.penalties.rho_cpu);
  w.kv("msr", e.penalties.rho_msr);
  w.kv("delay", e.penalties.rho_delay);
  w.close();
  w.open("weights");
  w.kv("compute", e.weights.w1);
  w.kv("energy", e.weights.w2);
  w.kv("delay", e.weights.w3);
  w.kv("reward_scale", e.weights.w4);
  w.close();
  w.open("slices");
  for (const auto& s : e.slices) {
    w.raw("- name: " + quoted(s.name));
    w.indent(1);
    w.kv("sinr_threshold", s.sinr_threshold);
    w.kv("cpu_threshold", s.cpu_threshold);
    w.kv("delay_budget", s.delay_budget);
    w.kv("arrival_rate", s.arrival_rate);
    w.kv("packet_rate", s.packet_rate);
    w.kv("max_users", u(s.max_users));
    w.kv("initial_cpu", s.initial_cpu);
    w.indent(-1);
  }
  w.close();
  w.close();

  w.open("agents");
  w.open("dtd3");
  w.kv("hidden", list(c.dtd3.hidden));
  w.kv("activation", std::string(activation_name(c.dtd3.activation)));
  w.kv("gamma", c.dtd3.gamma);
  w.kv("tau", c.dtd3.tau);
  w.kv("exploration_noise", c.dtd3.exploration_noise);
  w.kv("smoothing_noise", c.dtd3.smoothing_noise);
  w.kv("smoothing_clip", c.dtd3.smoothing_clip);
  w.kv("clip_boundary", c.dtd3.clip_boundary);
  w.kv("policy_freq", u(c.dtd3.policy_freq));
  w.kv("batch_size", u(c.dtd3.batch_size));
  w.kv("actor_lr", c.dtd3.actor_lr);
  w.kv("critic_lr", c.dtd3.critic_lr);
  w.kv("reward_scale", c.dtd3.reward_scale);
  w.kv("target_samples", u(c.dtd3.target_samples));
  w.kv("initial_sigma", c.dtd3.initial_sigma);
  w.kv("priority_transform", std::string(transform_name(c.dtd3.priority_transform)));
  w.close();
  w.open("td3");
  w.kv("hidden", list(c.td3.hidden));
  w.kv("activation", std::string(activation_name(c.td3.activation)));
  w.kv("gamma", c.td3.gamma);
  w.kv("tau", c.td3.tau);
  w.kv("exploration_noise", c.td3.exploration_noise);
  w.kv("smoothing_noise", c.td3.smoothing_noise);
  w.kv("smoothing_clip", c.td3.smoothing_clip);
  w.kv("policy_freq", u(c.td3.policy_freq));
  w.kv("batch_size", u(c.td3.batch_size));
  w.kv("actor_lr", c.td3.actor_lr);
  w.kv("critic_lr", c.td3.critic_lr);
  w.kv("reward_scale", c.td3.reward_scale);
  w.close();
  w.open("ddpg");
  w.kv("hidden", list(c.ddpg.hidden));
  w.kv("activation", std::string(activation_name(c.ddpg.activation)));
  w.kv("gamma", c.ddpg.gamma);
  w.kv("tau", c.ddpg.tau);
  w.kv("noise", std::string(noise_name(c.ddpg.noise)));
  w.kv("noise_sigma", c.ddpg.noise_sigma);
  w.kv("ou_theta", c.ddpg.ou_theta);
  w.kv("batch_size", u(c.ddpg.batch_size));
  w.kv("actor_lr", c.ddpg.actor_lr);
  w.kv("critic_lr", c.ddpg.critic_lr);
  w.kv("reward_scale", c.ddpg.reward_scale);
  w.close();
  w.close();

  const auto& r = c.runtime;
  w.open("runtime");
  w.kv("total_timesteps", r.total_timesteps);
  w.kv("start_timesteps", r.start_timesteps);
  w.kv("eval_interval", r.eval_interval);
  w.kv("eval_episodes", u(r.eval_episodes));
  w.kv("eval_top_k", u(r.eval_top_k));
  w.kv("mode", std::string(to_string(r.mode)));
  w.kv("actors", u(r.actors));
  w.kv("buffers", u(r.buffers));
  w.kv("learners", u(r.learners));
  w.kv("lockstep", r.lockstep);
  w.kv("snapshot_refresh", u(r.snapshot_refresh));
  w.kv("replay_capacity", u(r.replay_capacity));
  w.kv("priority_alpha", r.priority_alpha);
  w.kv("priority_beta0", r.priority_beta0);
  w.kv("shard_policy", std::string(shard_name(r.shard_policy)));
  w.kv("seed", r.seed);
  w.close();
  return w.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = serialize(config);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

runtime::RunConfig run_config(const ExperimentConfig& config) {
  runtime::RunConfig r = config.runtime;
  r.replay = config.agent == AgentKind::kDTd3 ? runtime::ReplayKind::kPrioritized : runtime::ReplayKind::kUniform;
  return r;
}

std::unique_ptr<agent::ActorCriticAgent> make_agent(const ExperimentConfig& config, std::size_t state_dim,
                                                    std::size_t action_dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, "agent/init");
  switch (config.agent) {
    case AgentKind::kDTd3: return std::make_unique<agent::DTd3Agent>(state_dim, action_dim, config.dtd3, rng);
    case AgentKind::kTd3: return std::make_unique<agent::Td3Agent>(state_dim, action_dim, config.td3, rng);
    case AgentKind::kDdpg: return std::make_unique<agent::DdpgAgent>(state_dim, action_dim, config.ddpg, rng);
  }
  throw ConfigError("unknown agent kind");
}

}  // namespace slicebench::config
