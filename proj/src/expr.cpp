#include "depcag/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>

namespace depcag::expr {
namespace {

struct FuncInfo {
  const char* name;
  Func func;
  int arity;
};

constexpr std::array<FuncInfo, 8> kFuncs{{
    {"sin", Func::Sin, 1},
    {"cos", Func::Cos, 1},
    {"exp", Func::Exp, 1},
    {"tanh", Func::Tanh, 1},
    {"abs", Func::Abs, 1},
    {"min", Func::Min, 2},
    {"max", Func::Max, 2},
    {"sign", Func::Sign, 1},
}};

const FuncInfo* find_func(std::string_view name) {
  for (const auto& f : kFuncs)
    if (name == f.name) return &f;
  return nullptr;
}

const FuncInfo& info(Func f) {
  for (const auto& i : kFuncs)
    if (i.func == f) return i;
  return kFuncs[0];
}

double apply1(Func f, double a) {
  switch (f) {
    case Func::Sin: return std::sin(a);
    case Func::Cos: return std::cos(a);
    case Func::Exp: return std::exp(a);
    case Func::Tanh: return std::tanh(a);
    case Func::Abs: return std::fabs(a);
    case Func::Sign: return a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
    default: return 0.0;
  }
}

double apply2(Func f, double a, double b) {
  return f == Func::Min ? std::min(a, b) : std::max(a, b);
}

bool builtin_constant(std::string_view name, double& out) {
  if (name == "pi") {
    out = std::numbers::pi;
    return true;
  }
  if (name == "e") {
    out = std::numbers::e;
    return true;
  }
  return false;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr run() {
    NodePtr n = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return n;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr binary(Kind k, NodePtr a, NodePtr b, std::size_t off) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->offset = off;
    n->args = {std::move(a), std::move(b)};
    return n;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      skip();
      std::size_t off = pos_;
      if (accept('+')) lhs = binary(Kind::Add, lhs, term(), off);
      else if (accept('-')) lhs = binary(Kind::Sub, lhs, term(), off);
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      skip();
      std::size_t off = pos_;
      if (accept('*')) lhs = binary(Kind::Mul, lhs, unary(), off);
      else if (accept('/')) lhs = binary(Kind::Div, lhs, unary(), off);
      else return lhs;
    }
  }

  NodePtr unary() {
    skip();
    std::size_t off = pos_;
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Kind::Negate;
      n->offset = off;
      n->args = {unary()};
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    skip();
    std::size_t off = pos_;
    if (accept('^')) return binary(Kind::Pow, base, unary(), off);
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    char c = src_[pos_];
    std::size_t off = pos_;
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      std::string name(src_.substr(start, pos_ - start));
      skip();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        const FuncInfo* f = find_func(name);
        if (!f) throw ParseError(off, "unknown function '" + name + "'");
        ++pos_;
        auto n = std::make_shared<Node>();
        n->kind = Kind::Call;
        n->func = f->func;
        n->offset = off;
        n->args.push_back(expr());
        while (accept(',')) n->args.push_back(expr());
        if (!accept(')')) fail("expected ')' or ','");
        if (static_cast<int>(n->args.size()) != f->arity)
          throw ParseError(off, "function '" + name + "' expects " + std::to_string(f->arity) +
                                    " argument(s)");
        return n;
      }
      auto n = std::make_shared<Node>();
      n->kind = Kind::Variable;
      n->name = std::move(name);
      n->offset = off;
      return n;
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t s = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - s;
    };
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) throw ParseError(start, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) {
        // "2e" followed by something else: treat 'e' as not part of the number
        pos_ = save;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc()) throw ParseError(start, "malformed number");
    auto node = std::make_shared<Node>();
    node->kind = Kind::Number;
    node->value = v;
    node->offset = start;
    return node;
  }
};

void print_node(const Node& n, std::string& out) {
  char buf[64];
  switch (n.kind) {
    case Kind::Number:
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      return;
    case Kind::Variable: out += n.name; return;
    case Kind::Negate:
      out += "(-";
      print_node(*n.args[0], out);
      out += ")";
      return;
    case Kind::Call:
      out += info(n.func).name;
      out += "(";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print_node(*n.args[i], out);
      }
      out += ")";
      return;
    default: break;
  }
  const char* op = n.kind == Kind::Add   ? " + "
                   : n.kind == Kind::Sub ? " - "
                   : n.kind == Kind::Mul ? " * "
                   : n.kind == Kind::Div ? " / "
                                         : " ^ ";
  out += "(";
  print_node(*n.args[0], out);
  out += op;
  print_node(*n.args[1], out);
  out += ")";
}

bool equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case Kind::Number:
      if (!(a.value == b.value) && !(std::isnan(a.value) && std::isnan(b.value))) return false;
      break;
    case Kind::Variable:
      if (a.name != b.name) return false;
      break;
    case Kind::Call:
      if (a.func != b.func) return false;
      break;
    default: break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!equal(*a.args[i], *b.args[i])) return false;
  return true;
}

double eval_node(const Node& n, const std::map<std::string, double>& b) {
  switch (n.kind) {
    case Kind::Number: return n.value;
    case Kind::Variable: {
      auto it = b.find(n.name);
      if (it != b.end()) return it->second;
      double c;
      if (builtin_constant(n.name, c)) return c;
      throw UnboundVariable(n.name, n.offset);
    }
    case Kind::Negate: return -eval_node(*n.args[0], b);
    case Kind::Add: return eval_node(*n.args[0], b) + eval_node(*n.args[1], b);
    case Kind::Sub: return eval_node(*n.args[0], b) - eval_node(*n.args[1], b);
    case Kind::Mul: return eval_node(*n.args[0], b) * eval_node(*n.args[1], b);
    case Kind::Div: return eval_node(*n.args[0], b) / eval_node(*n.args[1], b);
    case Kind::Pow: return std::pow(eval_node(*n.args[0], b), eval_node(*n.args[1], b));
    case Kind::Call:
      if (n.args.size() == 1) return apply1(n.func, eval_node(*n.args[0], b));
      return apply2(n.func, eval_node(*n.args[0], b), eval_node(*n.args[1], b));
  }
  return 0.0;
}

void collect(const Node& n, std::set<std::string>& out) {
  if (n.kind == Kind::Variable) out.insert(n.name);
  for (const auto& a : n.args) collect(*a, out);
}

}  // namespace

Expr parse(std::string_view source) { return Expr(Parser(source).run(), std::string(source)); }

std::string Expr::print() const {
  std::string out;
  if (root_) print_node(*root_, out);
  return out;
}

std::vector<std::string> Expr::identifiers() const {
  std::set<std::string> s;
  if (root_) collect(*root_, s);
  return {s.begin(), s.end()};
}

double Expr::eval(const std::map<std::string, double>& bindings) const {
  double v = eval_node(*root_, bindings);
  if (!std::isfinite(v)) throw NonFiniteResult("expression '" + print() + "' is not finite");
  return v;
}

bool operator==(const Expr& a, const Expr& b) {
  if (!a.root_ || !b.root_) return a.root_ == b.root_;
  return equal(*a.root_, *b.root_);
}

Compiled compile(const Expr& e, const std::vector<std::string>& slots,
                 const std::map<std::string, double>& constants) {
  Compiled c;
  c.source_ = e.source().empty() ? e.print() : e.source();
  int depth = 0;
  std::function<void(const Node&)> emit = [&](const Node& n) {
    using Op = Compiled::Op;
    switch (n.kind) {
      case Kind::Number:
        c.code_.push_back({Op::Push, Func::Sin, 0, n.value});
        depth++;
        break;
      case Kind::Variable: {
        auto it = std::find(slots.begin(), slots.end(), n.name);
        if (it != slots.end()) {
          c.code_.push_back({Op::Load, Func::Sin, static_cast<int>(it - slots.begin()), 0.0});
        } else if (auto ct = constants.find(n.name); ct != constants.end()) {
          c.code_.push_back({Op::Push, Func::Sin, 0, ct->second});
        } else {
          double v;
          if (!builtin_constant(n.name, v)) throw UnboundVariable(n.name, n.offset);
          c.code_.push_back({Op::Push, Func::Sin, 0, v});
        }
        depth++;
        break;
      }
      case Kind::Negate:
        emit(*n.args[0]);
        c.code_.push_back({Op::Neg, Func::Sin, 0, 0.0});
        break;
      case Kind::Call:
        for (const auto& a : n.args) emit(*a);
        c.code_.push_back({n.args.size() == 1 ? Op::F1 : Op::F2, n.func, 0, 0.0});
        if (n.args.size() == 2) depth--;
        break;
      default: {
        emit(*n.args[0]);
        emit(*n.args[1]);
        Op op = n.kind == Kind::Add   ? Op::Add
                : n.kind == Kind::Sub ? Op::Sub
                : n.kind == Kind::Mul ? Op::Mul
                : n.kind == Kind::Div ? Op::Div
                                      : Op::Pow;
        c.code_.push_back({op, Func::Sin, 0, 0.0});
        depth--;
      }
    }
    c.depth_ = std::max(c.depth_, depth);
  };
  emit(*e.root());
  bool has_load = std::any_of(c.code_.begin(), c.code_.end(),
                              [](const auto& i) { return i.op == Compiled::Op::Load; });
  if (!has_load) {
    double v = c.eval({});
    c.code_ = {{Compiled::Op::Push, Func::Sin, 0, v}};
    c.depth_ = 1;
    c.constant_ = true;
  }
  return c;
}

Compiled constant(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return compile(parse(buf), {});
}

double Compiled::eval(std::span<const double> slots) const {
  std::array<double, 64> small{};
  std::vector<double> big;
  double* st = small.data();
  if (depth_ > static_cast<int>(small.size())) {
    big.resize(depth_);
    st = big.data();
  }
  int sp = 0;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Push: st[sp++] = in.value; break;
      case Op::Load: st[sp++] = slots[in.slot]; break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Add: --sp; st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
      case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
      case Op::F1: st[sp - 1] = apply1(in.func, st[sp - 1]); break;
      case Op::F2: --sp; st[sp - 1] = apply2(in.func, st[sp - 1], st[sp]); break;
    }
  }
  return st[0];
}

double Compiled::eval_checked(std::span<const double> slots) const {
  double v = eval(slots);
  if (!std::isfinite(v)) throw NonFiniteResult("expression '" + source_ + "' is not finite");
  return v;
}

}  // namespace depcag::expr
