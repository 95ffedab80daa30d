// SPDX-License-Identifier: Apache-2.0
#include "taskgen/statement.hpp"

#include <array>

namespace truthlens::taskgen {
namespace {

struct TaskInfo {
  Task task;
  std::string_view name;
  size_t size;
};

constexpr std::array<TaskInfo, 11> kTasks{{
    {Task::kF0, "F0", 1594},
    {Task::kF1, "F1", 1594},
    {Task::kF2, "F2", 1594},
    {Task::kF3, "F3", 2000},
    {Task::kF4, "F4", 2000},
    {Task::kF5, "F5", 2000},
    {Task::kA1, "A1", 1000},
    {Task::kA2, "A2", 1000},
    {Task::kA3, "A3", 1000},
    {Task::kF4N3, "F4-N3", 2000},
    {Task::kF4N4, "F4-N4", 2000},
}};

constexpr std::array<Task, 11> kTaskList{Task::kF0, Task::kF1, Task::kF2, Task::kF3,
                                          Task::kF4, Task::kF5, Task::kA1, Task::kA2,
                                          Task::kA3, Task::kF4N3, Task::kF4N4};

const TaskInfo& info(Task task) {
  for (const auto& t : kTasks)
    if (t.task == task) return t;
  return kTasks[0];
}

}  // namespace

std::string_view task_name(Task task) { return info(task).name; }

std::optional<Task> parse_task(std::string_view name) {
  for (const auto& t : kTasks)
    if (t.name == name) return t.task;
  return std::nullopt;
}

std::span<const Task> all_tasks() { return kTaskList; }

size_t default_size(Task task) { return info(task).size; }

bool is_arithmetic(Task task) {
  return task == Task::kA1 || task == Task::kA2 || task == Task::kA3;
}

std::string_view split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

}  // namespace truthlens::taskgen
