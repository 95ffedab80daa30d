// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace truthlens::taskgen {

enum class Task { kF0, kF1, kF2, kF3, kF4, kF5, kA1, kA2, kA3, kF4N3, kF4N4 };

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);
std::span<const Task> all_tasks();

/// Dataset sizes used by the reference experiments (F0-F2: 1594, counting
/// tasks: 2000, arithmetic: 1000).
size_t default_size(Task task);

bool is_arithmetic(Task task);

enum class Split { kTrain, kTest };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

/// One true/false statement. `text` is the model input (the statement after
/// prompt templating); the bare statement is kept in meta["statement"].
/// `task` is a string so synthetic stacks can use their own task names.
struct LabeledStatement {
  int64_t id = 0;
  std::string task;
  std::string text;
  bool label = false;
  std::string prompt = "no-prompt";
  Split split = Split::kTrain;
  nlohmann::json meta = nlohmann::json::object();
};

using Dataset = std::vector<LabeledStatement>;

}  // namespace truthlens::taskgen
