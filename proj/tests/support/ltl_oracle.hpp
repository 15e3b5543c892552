#pragma once

// Independent finite-trace semantics: every subformula gets a truth vector
// over all positions, filled directly from the quantifier definitions.

#include <string>
#include <vector>

#include "irl/ltl.hpp"
#include "irl/rng.hpp"

namespace irl::testing {

inline std::vector<bool> truth_table(const ltl::Formula& f, const ltl::Trace& trace) {
  using ltl::Op;
  const std::size_t n = trace.size();
  std::vector<bool> out(n, false);
  switch (f.op()) {
    case Op::True:
      out.assign(n, true);
      return out;
    case Op::False:
      return out;
    case Op::Atom:
      for (std::size_t i = 0; i < n; ++i) out[i] = trace[i].at(f.name());
      return out;
    default:
      break;
  }
  const std::vector<bool> a = truth_table(f.is_unary() ? f.operand() : f.lhs(), trace);
  const std::vector<bool> b = f.is_binary() ? truth_table(f.rhs(), trace) : std::vector<bool>{};
  for (std::size_t i = 0; i < n; ++i) {
    switch (f.op()) {
      case Op::Not: out[i] = !a[i]; break;
      case Op::And: out[i] = a[i] && b[i]; break;
      case Op::Or: out[i] = a[i] || b[i]; break;
      case Op::Implies: out[i] = !a[i] || b[i]; break;
      case Op::Next: out[i] = i + 1 < n && a[i + 1]; break;
      case Op::Globally: {
        bool all = true;
        for (std::size_t j = i; j < n; ++j) all = all && a[j];
        out[i] = all;
        break;
      }
      case Op::Finally: {
        bool any = false;
        for (std::size_t j = i; j < n; ++j) any = any || a[j];
        out[i] = any;
        break;
      }
      case Op::Until: {
        bool holds = false;
        for (std::size_t k = i; k < n && !holds; ++k) {
          if (!b[k]) continue;
          bool prefix = true;
          for (std::size_t j = i; j < k; ++j) prefix = prefix && a[j];
          holds = prefix;
        }
        out[i] = holds;
        break;
      }
      default: break;
    }
  }
  return out;
}

inline const std::vector<std::string>& oracle_atoms() {
  static const std::vector<std::string> names{"p", "q", "r"};
  return names;
}

inline ltl::Formula random_formula(Rng& rng, int depth) {
  using ltl::Op;
  const auto& names = oracle_atoms();
  if (depth <= 1 || rng.bernoulli(0.2)) {
    if (rng.bernoulli(0.05)) return ltl::Formula::constant(rng.bernoulli(0.5));
    return ltl::Atom(names[rng.uniform_index(names.size())]);
  }
  static constexpr Op kUnary[] = {Op::Not, Op::Next, Op::Globally, Op::Finally};
  static constexpr Op kBinary[] = {Op::And, Op::Or, Op::Implies, Op::Until};
  if (rng.bernoulli(0.45)) return ltl::Formula::unary(kUnary[rng.uniform_index(4)], random_formula(rng, depth - 1));
  const Op op = kBinary[rng.uniform_index(4)];
  ltl::Formula lhs = random_formula(rng, depth - 1);
  return ltl::Formula::binary(op, lhs, random_formula(rng, depth - 1));
}

inline ltl::Trace random_trace(Rng& rng, std::size_t max_length) {
  ltl::Trace trace(1 + rng.uniform_index(max_length));
  for (auto& state : trace) {
    for (const auto& a : oracle_atoms()) state[a] = rng.bernoulli(0.5);
  }
  return trace;
}

}  // namespace irl::testing
