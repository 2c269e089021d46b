#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "slicebench/agent.hpp"
#include "slicebench/baselines.hpp"
#include "slicebench/env.hpp"
#include "slicebench/runtime.hpp"

namespace slicebench::config {

enum class AgentKind { kDTd3, kTd3, kDdpg };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent(std::string_view name);

std::string_view to_string(runtime::Mode mode);
runtime::Mode parse_mode(std::string_view name);

/// Everything needed to reproduce a run.
struct ExperimentConfig {
  std::string preset = "desk";
  AgentKind agent = AgentKind::kDTd3;
  env::EnvConfig env;
  agent::DTd3Config dtd3;
  agent::Td3Config td3;
  agent::DdpgConfig ddpg;
  runtime::RunConfig runtime;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Full-scale scenario: 150 APs, 50 subscribers, 2e6 steps.
ExperimentConfig paper_preset();
/// Desk-scale scenario: 16 APs, 8 subscribers, 1e5 steps.
ExperimentConfig desk_preset();
ExperimentConfig preset(std::string_view name);

/// Parses the YAML text. Every key is required and unknown keys are rejected;
/// errors name the offending key path.
ExperimentConfig parse(std::string_view text);
ExperimentConfig load(const std::string& path);

/// Canonical YAML; parse(serialize(c)) == c.
std::string serialize(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// The runtime settings with the replay kind matching the selected agent.
runtime::RunConfig run_config(const ExperimentConfig& config);

std::unique_ptr<agent::ActorCriticAgent> make_agent(const ExperimentConfig& config, std::size_t state_dim,
                                                    std::size_t action_dim, std::uint64_t seed);

}  // namespace slicebench::config
