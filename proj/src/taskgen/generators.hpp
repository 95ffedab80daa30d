// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

#include "taskgen/knowledge_base.hpp"
#include "taskgen/prompts.hpp"
#include "taskgen/statement.hpp"

namespace truthlens::taskgen {

// Every generator returns exactly n/2 true and n/2 false items in a seeded
// random order with ids 0..n-1, prompt "no-prompt" and split "train" (see
// split_dataset). n must be even. Output is a pure function of the arguments.

/// "The city of X is in Y."; false items swap in a uniformly drawn wrong country.
Dataset gen_f0(const KnowledgeBase& kb, size_t n, uint64_t seed);

/// "The city of X is not in Y."; true iff Y is not the city's country.
Dataset gen_f1(const KnowledgeBase& kb, size_t n, uint64_t seed);

/// Conjunction of two facts about distinct cities. False items cycle through
/// the three false rows of the AND truth table.
Dataset gen_f2(const KnowledgeBase& kb, size_t n, uint64_t seed);

/// "Exactly k of the following cities are in C: ...". list_len 2 is F3, 5 is
/// F4, 3 and 4 the intermediate variants. Stated k cycles over 0..list_len
/// within each class.
Dataset gen_exact_k(const KnowledgeBase& kb, size_t n, int list_len, uint64_t seed);

/// Two-country counting over six cities (F5).
Dataset gen_exact_k1_k2(const KnowledgeBase& kb, size_t n, uint64_t seed);

/// Arithmetic with 1-3 operators (A1-A3).
Dataset gen_arith(int n_ops, size_t n, uint64_t seed);

/// Dispatches on task id; the kb is unused for arithmetic tasks.
Dataset generate(Task task, const KnowledgeBase& kb, size_t n, uint64_t seed);

/// Recomputes the truth value from meta alone (kb lookups, counting, integer
/// evaluation of the expression). Never reads `statement.label`.
/// Throws Error(kInvalidArgument) when meta is incomplete or references
/// unknown cities.
bool oracle_label(const LabeledStatement& statement, const KnowledgeBase& kb);

/// Marks each item train/test. The train size is round(fraction * n) and the
/// class ratio of the whole set is carried into both splits (within one item).
/// Returns (train, test), each in input order.
std::pair<Dataset, Dataset> split_dataset(Dataset& dataset, double train_fraction, uint64_t seed);

/// Rewrites text (from meta["statement"]) and prompt id.
void apply_prompt(Dataset& dataset, const PromptTemplate& prompt);

}  // namespace truthlens::taskgen
