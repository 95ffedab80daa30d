// SPDX-License-Identifier: Apache-2.0
#include "taskgen/dataset_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "common/error.hpp"

namespace truthlens::taskgen {

std::string dataset_file_name(std::string_view task, std::string_view prompt) {
  return fmt::format("{}.{}.jsonl", task, prompt);
}

std::string to_jsonl_line(const LabeledStatement& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["task"] = s.task;
  j["text"] = s.text;
  j["label"] = s.label;
  j["prompt"] = s.prompt;
  j["split"] = split_name(s.split);
  j["meta"] = s.meta;
  return j.dump();
}

LabeledStatement from_json(const nlohmann::json& j) {
  LabeledStatement s;
  try {
    s.id = j.at("id").get<int64_t>();
    s.task = j.at("task").get<std::string>();
    s.text = j.at("text").get<std::string>();
    s.label = j.at("label").get<bool>();
    s.prompt = j.at("prompt").get<std::string>();
    const auto split = parse_split(j.at("split").get<std::string>());
    if (!split) fail(ErrorCode::kFormat, "split must be 'train' or 'test'");
    s.split = *split;
    s.meta = j.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed statement record: ") + e.what());
  }
  return s;
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  for (const auto& s : dataset) out << to_jsonl_line(s) << '\n';
  if (!out) fail(ErrorCode::kIo, fmt::format("write failed for '{}'", path.string()));
}

Dataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open manifest '{}'", path.string()));
  Dataset out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kFormat, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    out.push_back(from_json(j));
  }
  return out;
}

}  // namespace truthlens::taskgen
