// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "common/rng.hpp"

namespace truthlens::taskgen::arith {

enum class Op : char { kAdd = '+', kSub = '-', kMul = '*', kDiv = '/' };

/// Binary expression tree over integer leaves.
struct Expr {
  int64_t value = 0;
  Op op = Op::kAdd;
  std::unique_ptr<Expr> lhs;
  std::unique_ptr<Expr> rhs;

  bool is_leaf() const { return lhs == nullptr; }

  static std::unique_ptr<Expr> leaf(int64_t v);
  static std::unique_ptr<Expr> node(Op op, std::unique_ptr<Expr> lhs, std::unique_ptr<Expr> rhs);
};

int count_ops(const Expr& e);

/// nullopt when any division has a zero divisor or a remainder.
std::optional<int64_t> evaluate(const Expr& e);

/// ASCII rendering with spaces around operators; every operator node below
/// the root is wrapped in parentheses: "(37 + 15) / (12 - 8)".
std::string render(const Expr& e);

/// Shape uniform over all binary trees with `n_ops` internal nodes, operators
/// uniform over {+,-,*,/}, leaves uniform in [1, 99]. May contain inexact
/// divisions; see sample_exact.
std::unique_ptr<Expr> random_expression(int n_ops, Rng& rng);

/// Rejection-samples random_expression until every division is exact.
std::unique_ptr<Expr> sample_exact(int n_ops, Rng& rng);

/// Independent parser/evaluator for rendered expressions. Accepts ASCII
/// operators plus U+00D7, U+00F7 and U+2212, standard precedence and
/// parentheses. Throws Error(kFormat) on syntax errors or inexact division.
int64_t parse_and_evaluate(std::string_view text);

}  // namespace truthlens::taskgen::arith
