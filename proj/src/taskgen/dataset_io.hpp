// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "taskgen/statement.hpp"

namespace truthlens::taskgen {

/// "{task}.{prompt}.jsonl"
std::string dataset_file_name(std::string_view task, std::string_view prompt);

/// One JSON object per line, fields in the order
/// id, task, text, label, prompt, split, meta.
std::string to_jsonl_line(const LabeledStatement& s);
LabeledStatement from_json(const nlohmann::json& j);

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_jsonl(const std::filesystem::path& path);

}  // namespace truthlens::taskgen
