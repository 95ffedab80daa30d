// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "probe/probe.hpp"

namespace truthlens::experiments {

/// One entry of a plan's "operations" list, run by `run_plan`.
struct Operation {
  std::string op;  ///< sweep | xgen | matrix | transfer | polarity | project | similarity
  std::string source;
  std::string task;
  std::string prompt;
  std::string source_prompt;
  std::string target_prompt;
  std::optional<uint32_t> layer;

  nlohmann::ordered_json to_json() const;
  static Operation from_json(const nlohmann::json& j);
};

struct ExperimentPlan {
  std::vector<std::string> tasks;
  std::vector<std::string> prompts{"no-prompt"};
  /// Empty means "all": every layer with an activation file.
  std::vector<uint32_t> layers;
  uint64_t seed = 0;
  std::filesystem::path activations = "activations";
  std::filesystem::path out = "out";
  unsigned jobs = 1;
  probe::ProbeHyper hyper;
  std::string affirmative_task = "F0";
  std::string negated_task = "F1";
  std::vector<Operation> operations;

  bool all_layers() const { return layers.empty(); }
  /// Shape checks only; file existence is checked by the workspace.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ExperimentPlan from_json(const nlohmann::json& j);
  static ExperimentPlan load(const std::filesystem::path& path);
};

}  // namespace truthlens::experiments
