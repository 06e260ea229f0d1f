#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depcag/error.hpp"

// Small arithmetic expression language used for matrix entries and
// nonlinear terms. See docs/grammar.md for the grammar.
namespace depcag::expr {

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("parse", what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnboundVariable : public Error {
 public:
  UnboundVariable(std::string name, std::size_t offset)
      : Error("unbound", "unbound variable '" + name + "' at offset " + std::to_string(offset)),
        name_(std::move(name)), offset_(offset) {}
  const std::string& name() const noexcept { return name_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string name_;
  std::size_t offset_;
};

class NonFiniteResult : public Error {
 public:
  explicit NonFiniteResult(const std::string& what) : Error("nonfinite", what) {}
};

enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sin, Cos, Exp, Tanh, Abs, Min, Max, Sign };

struct Node {
  Kind kind = Kind::Number;
  double value = 0.0;
  std::string name;  // variable name
  Func func = Func::Sin;
  std::size_t offset = 0;
  std::vector<std::shared_ptr<const Node>> args;
};

using NodePtr = std::shared_ptr<const Node>;

class Expr {
 public:
  Expr() = default;
  explicit Expr(NodePtr root, std::string source = {})
      : root_(std::move(root)), source_(std::move(source)) {}

  const NodePtr& root() const { return root_; }
  const std::string& source() const { return source_; }

  // Fully parenthesized canonical form; numbers use %.17g.
  std::string print() const;
  // Identifiers referenced, sorted and unique.
  std::vector<std::string> identifiers() const;
  // Evaluation with named bindings; pi and e are built in.
  double eval(const std::map<std::string, double>& bindings) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  NodePtr root_;
  std::string source_;
};

Expr parse(std::string_view source);

// Stack-machine form with variables resolved to slots and constants folded.
class Compiled {
 public:
  double eval(std::span<const double> slots) const;
  // Throws NonFiniteResult when the value is NaN or infinite.
  double eval_checked(std::span<const double> slots) const;
  bool is_constant() const { return constant_; }
  const std::string& source() const { return source_; }

 private:
  friend Compiled compile(const Expr&, const std::vector<std::string>&,
                          const std::map<std::string, double>&);
  enum class Op : unsigned char { Push, Load, Neg, Add, Sub, Mul, Div, Pow, F1, F2 };
  struct Instr {
    Op op;
    Func func;
    int slot;
    double value;
  };
  std::vector<Instr> code_;
  int depth_ = 0;
  bool constant_ = false;
  std::string source_;
};

// Names in `slots` map to positions of the span passed to eval. Names in
// `constants` are folded in. Anything else raises UnboundVariable.
Compiled compile(const Expr& e, const std::vector<std::string>& slots,
                 const std::map<std::string, double>& constants = {});

Compiled constant(double v);

}  // namespace depcag::expr
