#include "irl/ltl.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

namespace irl::ltl {

Formula Formula::atom(std::string name) {
  return Formula(std::make_shared<const Node>(Node{Op::Atom, std::move(name), nullptr, nullptr}));
}

Formula Formula::constant(bool value) {
  return Formula(std::make_shared<const Node>(Node{value ? Op::True : Op::False, {}, nullptr, nullptr}));
}

Formula Formula::unary(Op op, Formula operand) {
  return Formula(std::make_shared<const Node>(
      Node{op, {}, std::make_shared<const Formula>(std::move(operand)), nullptr}));
}

Formula Formula::binary(Op op, Formula lhs, Formula rhs) {
  return Formula(std::make_shared<const Node>(Node{op, {}, std::make_shared<const Formula>(std::move(lhs)),
                                                   std::make_shared<const Formula>(std::move(rhs))}));
}

bool Formula::is_unary() const {
  switch (op()) {
    case Op::Not:
    case Op::Next:
    case Op::Globally:
    case Op::Finally:
      return true;
    default:
      return false;
  }
}

bool Formula::is_binary() const {
  switch (op()) {
    case Op::And:
    case Op::Or:
    case Op::Implies:
    case Op::Until:
      return true;
    default:
      return false;
  }
}

std::size_t Formula::depth() const {
  if (is_unary()) return 1 + operand().depth();
  if (is_binary()) return 1 + std::max(lhs().depth(), rhs().depth());
  return 0;
}

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op()) return false;
  if (a.op() == Op::Atom) return a.name() == b.name();
  if (a.is_unary()) return a.operand() == b.operand();
  if (a.is_binary()) return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  return true;
}

ParseError::ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found)
    : std::runtime_error([&] {
        std::ostringstream msg;
        msg << "LTL syntax error at offset " << offset << ": found " << found << ", expected one of {";
        for (std::size_t i = 0; i < expected.size(); ++i) msg << (i ? ", " : "") << expected[i];
        msg << "}";
        return msg.str();
      }()),
      offset_(offset),
      expected_(std::move(expected)) {}

namespace {

enum class Tok { Ident, Not, And, Or, Implies, Next, Globally, Finally, Until, LParen, RParen, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string text;
};

std::string describe(const Token& t) {
  if (t.kind == Tok::End) return "end of input";
  return "'" + t.text + "'";
}

const std::vector<std::string> kOperandStart{"identifier", "true", "false", "(", "!", "X", "G", "F"};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    auto single = [&](Tok kind) {
      tokens.push_back({kind, start, std::string(1, c)});
      ++i;
    };
    switch (c) {
      case '!': single(Tok::Not); continue;
      case '&': single(Tok::And); continue;
      case '|': single(Tok::Or); continue;
      case '(': single(Tok::LParen); continue;
      case ')': single(Tok::RParen); continue;
      case 'X': single(Tok::Next); continue;
      case 'G': single(Tok::Globally); continue;
      case 'F': single(Tok::Finally); continue;
      case 'U': single(Tok::Until); continue;
      case '-':
        if (i + 1 < text.size() && text[i + 1] == '>') {
          tokens.push_back({Tok::Implies, start, "->"});
          i += 2;
          continue;
        }
        throw ParseError(start, {"->"}, "'-'");
      default:
        break;
    }
    if (c == '_' || (c >= 'a' && c <= 'z')) {
      while (i < text.size() &&
             (text[i] == '_' || (text[i] >= 'a' && text[i] <= 'z') || (text[i] >= '0' && text[i] <= '9'))) {
        ++i;
      }
      tokens.push_back({Tok::Ident, start, std::string(text.substr(start, i - start))});
      continue;
    }
    throw ParseError(start, kOperandStart, "unknown token '" + std::string(1, c) + "'");
  }
  tokens.push_back({Tok::End, text.size(), ""});
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Formula parse_all() {
    Formula f = parse_implies();
    if (peek().kind != Tok::End) {
      throw ParseError(peek().offset, {"->", "|", "&", "U", ")", "end of input"}, describe(peek()));
    }
    return f;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }

  Formula parse_implies() {
    Formula lhs = parse_or();
    if (peek().kind == Tok::Implies) {
      advance();
      return Implies(std::move(lhs), parse_implies());
    }
    return lhs;
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (peek().kind == Tok::Or) {
      advance();
      f = Or(std::move(f), parse_and());
    }
    return f;
  }

  Formula parse_and() {
    Formula f = parse_unary();
    while (peek().kind == Tok::And) {
      advance();
      f = And(std::move(f), parse_unary());
    }
    return f;
  }

  Formula parse_unary() {
    switch (peek().kind) {
      case Tok::Not: advance(); return Not(parse_unary());
      case Tok::Next: advance(); return Next(parse_unary());
      case Tok::Globally: advance(); return Globally(parse_unary());
      case Tok::Finally: advance(); return Finally(parse_unary());
      default: return parse_until();
    }
  }

  Formula parse_until() {
    Formula f = parse_primary();
    while (peek().kind == Tok::Until) {
      advance();
      f = Until(std::move(f), parse_primary());
    }
    return f;
  }

  Formula parse_primary() {
    const Token& t = peek();
    if (t.kind == Tok::Ident) {
      advance();
      if (t.text == "true") return Formula::constant(true);
      if (t.text == "false") return Formula::constant(false);
      return Atom(t.text);
    }
    if (t.kind == Tok::LParen) {
      advance();
      Formula inner = parse_implies();
      if (peek().kind != Tok::RParen) throw ParseError(peek().offset, {")"}, describe(peek()));
      advance();
      return inner;
    }
    // Unary operators are not operands of U without parentheses.
    throw ParseError(t.offset, {"identifier", "true", "false", "("}, describe(t));
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

int precedence(const Formula& f) {
  switch (f.op()) {
    case Op::Implies: return 1;
    case Op::Or: return 2;
    case Op::And: return 3;
    case Op::Not:
    case Op::Next:
    case Op::Globally:
    case Op::Finally: return 4;
    case Op::Until: return 5;
    default: return 6;
  }
}

void print(const Formula& f, std::string& out, int min_prec);

void print_child(const Formula& f, std::string& out, int min_prec) {
  if (precedence(f) < min_prec) {
    out += '(';
    print(f, out, 0);
    out += ')';
  } else {
    print(f, out, min_prec);
  }
}

void print(const Formula& f, std::string& out, int /*min_prec*/) {
  switch (f.op()) {
    case Op::Atom: out += f.name(); return;
    case Op::True: out += "true"; return;
    case Op::False: out += "false"; return;
    case Op::Not:
    case Op::Next:
    case Op::Globally:
    case Op::Finally: {
      const char sym = f.op() == Op::Not ? '!' : f.op() == Op::Next ? 'X' : f.op() == Op::Globally ? 'G' : 'F';
      out += sym;
      out += '(';
      print(f.operand(), out, 0);
      out += ')';
      return;
    }
    case Op::Implies:
      print_child(f.lhs(), out, 2);
      out += " -> ";
      print_child(f.rhs(), out, 1);
      return;
    case Op::Or:
      print_child(f.lhs(), out, 2);
      out += " | ";
      print_child(f.rhs(), out, 3);
      return;
    case Op::And:
      print_child(f.lhs(), out, 3);
      out += " & ";
      print_child(f.rhs(), out, 4);
      return;
    case Op::Until:
      print_child(f.lhs(), out, 5);
      out += " U ";
      print_child(f.rhs(), out, 6);
      return;
  }
}

void collect_atoms(const Formula& f, std::set<std::string>& out) {
  if (f.op() == Op::Atom) {
    out.insert(f.name());
  } else if (f.is_unary()) {
    collect_atoms(f.operand(), out);
  } else if (f.is_binary()) {
    collect_atoms(f.lhs(), out);
    collect_atoms(f.rhs(), out);
  }
}

bool eval_at(const Formula& f, const Trace& trace, std::size_t i) {
  const std::size_t n = trace.size();
  switch (f.op()) {
    case Op::Atom: {
      const auto it = trace[i].find(f.name());
      if (it == trace[i].end()) {
        throw EvalError("atom '" + f.name() + "' missing from state " + std::to_string(i));
      }
      return it->second;
    }
    case Op::True: return true;
    case Op::False: return false;
    case Op::Not: return !eval_at(f.operand(), trace, i);
    case Op::And: return eval_at(f.lhs(), trace, i) && eval_at(f.rhs(), trace, i);
    case Op::Or: return eval_at(f.lhs(), trace, i) || eval_at(f.rhs(), trace, i);
    case Op::Implies: return !eval_at(f.lhs(), trace, i) || eval_at(f.rhs(), trace, i);
    case Op::Next: return i + 1 < n && eval_at(f.operand(), trace, i + 1);
    case Op::Globally:
      for (std::size_t k = i; k < n; ++k) {
        if (!eval_at(f.operand(), trace, k)) return false;
      }
      return true;
    case Op::Finally:
      for (std::size_t k = i; k < n; ++k) {
        if (eval_at(f.operand(), trace, k)) return true;
      }
      return false;
    case Op::Until:
      for (std::size_t k = i; k < n; ++k) {
        if (eval_at(f.rhs(), trace, k)) return true;
        if (!eval_at(f.lhs(), trace, k)) return false;
      }
      return false;
  }
  return false;
}

}  // namespace

Formula parse_ltl(std::string_view text) { return Parser(tokenize(text)).parse_all(); }

std::string to_string(const Formula& f) {
  std::string out;
  print(f, out, 0);
  return out;
}

std::set<std::string> atoms(const Formula& f) {
  std::set<std::string> out;
  collect_atoms(f, out);
  return out;
}

bool eval_formula(const Formula& f, const Trace& trace, std::size_t position) {
  if (position >= trace.size()) {
    throw EvalError("position " + std::to_string(position) + " outside trace of length " +
                    std::to_string(trace.size()));
  }
  return eval_at(f, trace, position);
}

double rule_penalty(const Formula& f, const Trace& trace) {
  if (trace.empty()) throw EvalError("rule penalty needs a non-empty trace");
  return eval_formula(f, trace, 0) ? 0.0 : -1.0;
}

}  // namespace irl::ltl
