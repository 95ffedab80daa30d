// SPDX-License-Identifier: Apache-2.0
#include "taskgen/arith.hpp"

#include <array>
#include <cctype>

#include <fmt/format.h>

#include "common/error.hpp"

namespace truthlens::taskgen::arith {
namespace {

constexpr std::array<Op, 4> kOps{Op::kAdd, Op::kSub, Op::kMul, Op::kDiv};

uint64_t catalan(int n) {
  uint64_t c = 1;
  for (int i = 0; i < n; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
  return c;
}

// The idx-th binary tree shape with n internal nodes, leaves/operators unset.
std::unique_ptr<Expr> shape(int n, uint64_t idx) {
  if (n == 0) return Expr::leaf(0);
  for (int left = 0; left < n; ++left) {
    const uint64_t right_count = catalan(n - 1 - left);
    const uint64_t count = catalan(left) * right_count;
    if (idx < count)
      return Expr::node(Op::kAdd, shape(left, idx / right_count), shape(n - 1 - left, idx % right_count));
    idx -= count;
  }
  fail(ErrorCode::kInternal, "shape index out of range");
}

void fill(Expr& e, Rng& rng) {
  if (e.is_leaf()) {
    e.value = rng.uniform_int(1, 99);
    return;
  }
  e.op = kOps[rng.uniform_index(kOps.size())];
  fill(*e.lhs, rng);
  fill(*e.rhs, rng);
}

void render_into(const Expr& e, bool root, std::string& out) {
  if (e.is_leaf()) {
    out += std::to_string(e.value);
    return;
  }
  if (!root) out.push_back('(');
  render_into(*e.lhs, false, out);
  out.push_back(' ');
  out.push_back(static_cast<char>(e.op));
  out.push_back(' ');
  render_into(*e.rhs, false, out);
  if (!root) out.push_back(')');
}

std::optional<int64_t> apply(Op op, int64_t a, int64_t b) {
  switch (op) {
    case Op::kAdd: return a + b;
    case Op::kSub: return a - b;
    case Op::kMul: return a * b;
    case Op::kDiv:
      if (b == 0 || a % b != 0) return std::nullopt;
      return a / b;
  }
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  int64_t parse() {
    const int64_t v = expression();
    skip_space();
    if (pos_ != text_.size()) error("unexpected trailing input");
    return v;
  }

 private:
  [[noreturn]] void error(std::string_view what) const {
    fail(ErrorCode::kFormat, fmt::format("arithmetic parse error at offset {} in '{}': {}", pos_, text_, what));
  }

  void skip_space() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  // Returns the operator at the cursor (normalising Unicode forms) and its
  // byte length, or 0 when the cursor is not on an operator.
  std::pair<char, size_t> peek_op() {
    skip_space();
    if (pos_ >= text_.size()) return {0, 0};
    const std::string_view rest = text_.substr(pos_);
    const char c = rest[0];
    if (c == '+' || c == '-' || c == '*' || c == '/') return {c, 1};
    if (rest.starts_with("\xC3\x97")) return {'*', 2};      // ×
    if (rest.starts_with("\xC3\xB7")) return {'/', 2};      // ÷
    if (rest.starts_with("\xE2\x88\x92")) return {'-', 3};  // −
    return {0, 0};
  }

  int64_t expression() {
    int64_t acc = term();
    for (;;) {
      const auto [op, len] = peek_op();
      if (op != '+' && op != '-') return acc;
      pos_ += len;
      const int64_t rhs = term();
      acc = op == '+' ? acc + rhs : acc - rhs;
    }
  }

  int64_t term() {
    int64_t acc = factor();
    for (;;) {
      const auto [op, len] = peek_op();
      if (op != '*' && op != '/') return acc;
      pos_ += len;
      const int64_t rhs = factor();
      if (op == '*') {
        acc *= rhs;
      } else {
        if (rhs == 0) error("division by zero");
        if (acc % rhs != 0) error("inexact division");
        acc /= rhs;
      }
    }
  }

  int64_t factor() {
    skip_space();
    if (pos_ >= text_.size()) error("unexpected end of input");
    if (text_[pos_] == '(') {
      ++pos_;
      const int64_t v = expression();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') error("expected ')'");
      ++pos_;
      return v;
    }
    const auto [op, len] = peek_op();
    if (op == '-') {
      pos_ += len;
      return -factor();
    }
    if (!std::isdigit(static_cast<unsigned char>(text_[pos_]))) error("expected a number");
    int64_t v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > (int64_t{1} << 40)) error("number too large");
      ++pos_;
    }
    return v;
  }

  std::string_view text_;
  size_t pos_ = 0;
};

}  // namespace

std::unique_ptr<Expr> Expr::leaf(int64_t v) {
  auto e = std::make_unique<Expr>();
  e->value = v;
  return e;
}

std::unique_ptr<Expr> Expr::node(Op op, std::unique_ptr<Expr> lhs, std::unique_ptr<Expr> rhs) {
  auto e = std::make_unique<Expr>();
  e->op = op;
  e->lhs = std::move(lhs);
  e->rhs = std::move(rhs);
  return e;
}

int count_ops(const Expr& e) { return e.is_leaf() ? 0 : 1 + count_ops(*e.lhs) + count_ops(*e.rhs); }

std::optional<int64_t> evaluate(const Expr& e) {
  if (e.is_leaf()) return e.value;
  const auto a = evaluate(*e.lhs);
  if (!a) return std::nullopt;
  const auto b = evaluate(*e.rhs);
  if (!b) return std::nullopt;
  return apply(e.op, *a, *b);
}

std::string render(const Expr& e) {
  std::string out;
  render_into(e, true, out);
  return out;
}

std::unique_ptr<Expr> random_expression(int n_ops, Rng& rng) {
  require(n_ops >= 1 && n_ops <= 3, fmt::format("n_ops must be 1, 2 or 3 (got {})", n_ops));
  auto e = shape(n_ops, rng.uniform_index(catalan(n_ops)));
  fill(*e, rng);
  return e;
}

std::unique_ptr<Expr> sample_exact(int n_ops, Rng& rng) {
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    auto e = random_expression(n_ops, rng);
    if (evaluate(*e)) return e;
  }
  fail(ErrorCode::kInternal, "could not sample an expression with exact divisions");
}

int64_t parse_and_evaluate(std::string_view text) { return Parser(text).parse(); }

}  // namespace truthlens::taskgen::arith
