// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>

namespace truthlens::taskgen {

/// A fixed textual wrapper: rendered text is prefix + statement + suffix.
/// The prefix carries its own separator (newline for instruction prompts,
/// a space for the two control prompts).
struct PromptTemplate {
  std::string_view id;
  std::string_view prefix;
  std::string_view suffix;
};

std::span<const PromptTemplate> all_prompts();

/// Throws Error(kInvalidArgument) for an unknown id.
const PromptTemplate& prompt_template(std::string_view id);

bool is_prompt_id(std::string_view id);

std::string apply_prompt(const PromptTemplate& prompt, std::string_view statement);

}  // namespace truthlens::taskgen
