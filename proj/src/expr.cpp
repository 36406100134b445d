#include "psolv/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <vector>

#include "psolv/common.hpp"

namespace psolv {

namespace {

// Flat AST: nodes in evaluation order reference earlier slots, so eval is a
// single pass over a vector. Op codes double as arity markers.
enum class Op {
  Const, VarT, VarX, VarXi,
  Neg, Exp, Tanh, Sin, Cos, Abs,
  Add, Sub, Mul, Div, Pow, Min, Max,
};

struct Node {
  Op op;
  double value = 0.0;   // Const
  int a = -1, b = -1;   // operand slots
};

struct Program {
  std::vector<Node> nodes;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : src_(src) {}

  Program run() {
    const int root = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    (void)root;  // last node is the root by construction
    return std::move(prog_);
  }

 private:
  const std::string& src_;
  std::size_t pos_ = 0;
  Program prog_;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "expression error at offset " << pos_ << ": " << what;
    throw Error(os.str());
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  int emit(Op op, int a = -1, int b = -1, double v = 0.0) {
    prog_.nodes.push_back({op, v, a, b});
    return static_cast<int>(prog_.nodes.size()) - 1;
  }

  // sum := product (('+' | '-') product)*
  int parse_sum() {
    int lhs = parse_product();
    for (;;) {
      if (eat('+'))
        lhs = emit(Op::Add, lhs, parse_product());
      else if (eat('-'))
        lhs = emit(Op::Sub, lhs, parse_product());
      else
        return lhs;
    }
  }

  // product := unary (('*' | '/') unary)*
  int parse_product() {
    int lhs = parse_unary();
    for (;;) {
      if (eat('*'))
        lhs = emit(Op::Mul, lhs, parse_unary());
      else if (eat('/'))
        lhs = emit(Op::Div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  // unary := ('-' | '+') unary | power.  Unary minus binds looser than '^',
  // so -x^2 reads -(x^2).
  int parse_unary() {
    if (eat('-')) return emit(Op::Neg, parse_unary());
    if (eat('+')) return parse_unary();
    return parse_power();
  }

  // power := atom ('^' unary)?   (right-associative, signed exponents ok)
  int parse_power() {
    const int base = parse_atom();
    if (eat('^')) return emit(Op::Pow, base, parse_unary());
    return base;
  }

  int parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail("expected a value");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      const int e = parse_sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
    fail(std::string("unexpected character '") + c + "'");
  }

  int parse_number() {
    const char* start = src_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(start, &end);
    if (end == start) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - start);
    return emit(Op::Const, -1, -1, v);
  }

  int parse_name() {
    const std::size_t begin = pos_;
    while (pos_ < src_.size() &&
           std::isalnum(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    const std::string name = src_.substr(begin, pos_ - begin);
    if (name == "t") return emit(Op::VarT);
    if (name == "x") return emit(Op::VarX);
    if (name == "xi") return emit(Op::VarXi);

    Op op;
    int arity = 1;
    if (name == "exp") op = Op::Exp;
    else if (name == "tanh") op = Op::Tanh;
    else if (name == "sin") op = Op::Sin;
    else if (name == "cos") op = Op::Cos;
    else if (name == "abs") op = Op::Abs;
    else if (name == "min") { op = Op::Min; arity = 2; }
    else if (name == "max") { op = Op::Max; arity = 2; }
    else { pos_ = begin; fail("unknown name '" + name + "'"); }

    if (!eat('(')) fail("expected '(' after '" + name + "'");
    const int a = parse_sum();
    int b = -1;
    if (arity == 2) {
      if (!eat(',')) fail("expected ',' in '" + name + "'");
      b = parse_sum();
    }
    if (!eat(')')) fail("expected ')' closing '" + name + "'");
    return emit(op, a, b);
  }
};

double run_program(const Program& p, double t, double x, double xi,
                   std::vector<double>& slots) {
  slots.resize(p.nodes.size());
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const Node& n = p.nodes[i];
    double v = 0.0;
    switch (n.op) {
      case Op::Const: v = n.value; break;
      case Op::VarT: v = t; break;
      case Op::VarX: v = x; break;
      case Op::VarXi: v = xi; break;
      case Op::Neg: v = -slots[n.a]; break;
      case Op::Exp: v = std::exp(slots[n.a]); break;
      case Op::Tanh: v = std::tanh(slots[n.a]); break;
      case Op::Sin: v = std::sin(slots[n.a]); break;
      case Op::Cos: v = std::cos(slots[n.a]); break;
      case Op::Abs: v = std::abs(slots[n.a]); break;
      case Op::Add: v = slots[n.a] + slots[n.b]; break;
      case Op::Sub: v = slots[n.a] - slots[n.b]; break;
      case Op::Mul: v = slots[n.a] * slots[n.b]; break;
      case Op::Div: v = slots[n.a] / slots[n.b]; break;
      case Op::Pow: v = std::pow(slots[n.a], slots[n.b]); break;
      case Op::Min: v = std::min(slots[n.a], slots[n.b]); break;
      case Op::Max: v = std::max(slots[n.a], slots[n.b]); break;
    }
    slots[i] = v;
  }
  return slots.back();
}

}  // namespace

ScalarSymbol compile_expr(const std::string& src) {
  auto prog = std::make_shared<Program>(Parser(src).run());
  if (prog->nodes.empty()) throw Error("expression error: empty input");
  return [prog](double t, double x, double xi) {
    thread_local std::vector<double> slots;
    return run_program(*prog, t, x, xi, slots);
  };
}

double eval_expr(const std::string& src, double t, double x, double xi) {
  return compile_expr(src)(t, x, xi);
}

}  // namespace psolv
