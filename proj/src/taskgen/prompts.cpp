// SPDX-License-Identifier: Apache-2.0
#include "taskgen/prompts.hpp"

#include <array>

#include "common/error.hpp"

namespace truthlens::taskgen {
namespace {

constexpr std::array<PromptTemplate, 7> kPrompts{{
    {"no-prompt", "", ""},
    {"ask-correct", "Is the following correct?\n", " Answer:"},
    {"ask-tf", "Is the following statement TRUE or FALSE?\n", " Answer:"},
    {"ask-able", "Are you able to evaluate the truthfulness of the following statement?\n", " Answer:"},
    {"ask-arith", "Are you able to evaluate the correctness of the following arithmetic expression?\n",
     " Answer:"},
    {"random-prompt", "Green table running bright. ", " Answer:"},
    {"read-prompt", "Read the following sentence. ", " Answer:"},
}};

}  // namespace

std::span<const PromptTemplate> all_prompts() { return kPrompts; }

bool is_prompt_id(std::string_view id) {
  for (const auto& p : kPrompts)
    if (p.id == id) return true;
  return false;
}

const PromptTemplate& prompt_template(std::string_view id) {
  for (const auto& p : kPrompts)
    if (p.id == id) return p;
  fail(ErrorCode::kInvalidArgument, "unknown prompt template '" + std::string(id) + "'");
}

std::string apply_prompt(const PromptTemplate& prompt, std::string_view statement) {
  std::string out;
  out.reserve(prompt.prefix.size() + statement.size() + prompt.suffix.size());
  out += prompt.prefix;
  out += statement;
  out += prompt.suffix;
  return out;
}

}  // namespace truthlens::taskgen
