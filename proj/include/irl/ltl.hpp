#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace irl::ltl {

enum class Op { Atom, True, False, Not, And, Or, Implies, Next, Globally, Finally, Until };

/// Immutable LTL syntax tree. Children are shared, so copies are cheap.
class Formula {
 public:
  static Formula atom(std::string name);
  static Formula constant(bool value);
  static Formula unary(Op op, Formula operand);
  static Formula binary(Op op, Formula lhs, Formula rhs);

  Op op() const { return node_->op; }
  const std::string& name() const { return node_->name; }
  const Formula& lhs() const { return *node_->lhs; }
  const Formula& rhs() const { return *node_->rhs; }
  /// Operand of a unary node.
  const Formula& operand() const { return *node_->lhs; }

  bool is_unary() const;
  bool is_binary() const;
  std::size_t depth() const;

  friend bool operator==(const Formula& a, const Formula& b);

 private:
  struct Node {
    Op op;
    std::string name;
    std::shared_ptr<const Formula> lhs;
    std::shared_ptr<const Formula> rhs;
  };
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Convenience builders, mostly for tests and programmatic rule sets.
inline Formula Atom(std::string name) { return Formula::atom(std::move(name)); }
inline Formula Not(Formula f) { return Formula::unary(Op::Not, std::move(f)); }
inline Formula Next(Formula f) { return Formula::unary(Op::Next, std::move(f)); }
inline Formula Globally(Formula f) { return Formula::unary(Op::Globally, std::move(f)); }
inline Formula Finally(Formula f) { return Formula::unary(Op::Finally, std::move(f)); }
inline Formula And(Formula a, Formula b) { return Formula::binary(Op::And, std::move(a), std::move(b)); }
inline Formula Or(Formula a, Formula b) { return Formula::binary(Op::Or, std::move(a), std::move(b)); }
inline Formula Implies(Formula a, Formula b) {
  return Formula::binary(Op::Implies, std::move(a), std::move(b));
}
inline Formula Until(Formula a, Formula b) {
  return Formula::binary(Op::Until, std::move(a), std::move(b));
}

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found);

  /// Byte offset of the offending token in the input.
  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grammar, loosest binding first:
///   implies := or ( "->" implies )?          right associative
///   or      := and ( "|" and )*
///   and     := unary ( "&" unary )*
///   unary   := ( "!" | "X" | "G" | "F" ) unary | until
///   until   := primary ( "U" primary )*      left associative
///   primary := atom | "true" | "false" | "(" implies ")"
/// Atoms match [a-z_][a-z0-9_]*; "true" and "false" are reserved.
Formula parse_ltl(std::string_view text);

/// Canonical text with the minimum parentheses needed to parse back to the
/// same tree. Unary operators always wrap their operand: G(p).
std::string to_string(const Formula& f);

std::set<std::string> atoms(const Formula& f);

/// Truth assignment over atom names for one state.
using State = std::map<std::string, bool, std::less<>>;
using Trace = std::vector<State>;

/// Finite-trace semantics. X at the last position is false.
bool eval_formula(const Formula& f, const Trace& trace, std::size_t position);

/// -1 if the trace violates the formula at position 0, otherwise 0.
double rule_penalty(const Formula& f, const Trace& trace);

}  // namespace irl::ltl
