#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "depcag/expr.hpp"

using namespace depcag::expr;

namespace {
double value(const char* src, std::map<std::string, double> b = {}) { return parse(src).eval(b); }
}

TEST_CASE("parse builds the expected tree") {
  Expr e = parse("sin(t)*z1 + 0.5*w1");
  const Node& root = *e.root();
  REQUIRE(root.kind == Kind::Add);
  const Node& lhs = *root.args[0];
  const Node& rhs = *root.args[1];
  CHECK(lhs.kind == Kind::Mul);
  CHECK(lhs.args[0]->kind == Kind::Call);
  CHECK(lhs.args[0]->func == Func::Sin);
  CHECK(lhs.args[0]->args[0]->name == "t");
  CHECK(lhs.args[1]->name == "z1");
  CHECK(rhs.kind == Kind::Mul);
  CHECK(rhs.args[0]->value == 0.5);
  CHECK(rhs.args[1]->name == "w1");
}

TEST_CASE("precedence and associativity") {
  CHECK(value("2^3^2") == 512.0);
  CHECK(value("-2^2") == -4.0);
  CHECK(value("1 - 2 - 3") == -4.0);
  CHECK(value("8 / 4 / 2") == 1.0);
  CHECK(value("2 + 3 * 4") == 14.0);
  CHECK(value("(2 + 3) * 4") == 20.0);
  CHECK(value("1e-3 * 1E3") == doctest::Approx(1.0));
}

TEST_CASE("functions and constants") {
  CHECK(value("sin(t)", {{"t", 0.0}}) == 0.0);
  CHECK(value("0.01*sin(z1)", {{"z1", 2.0}}) == doctest::Approx(0.0090930).epsilon(1e-6));
  CHECK(value("0.01*sin(z1)", {{"z1", 2.0}}) == 0.01 * std::sin(2.0));
  CHECK(value("cos(pi)") == doctest::Approx(-1.0));
  CHECK(value("exp(1) - e") == doctest::Approx(0.0));
  CHECK(value("abs(-3) + sign(-2) + min(1, 2) + max(1, 2) + tanh(0)") == 3 - 1 + 1 + 2);
}

TEST_CASE("syntax errors report an offset") {
  try {
    parse("z1 +");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(parse("(1 + 2"), ParseError);
  CHECK_THROWS_AS(parse("1 2"), ParseError);
  CHECK_THROWS_AS(parse("foo(1)"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
}

TEST_CASE("unbound variables are rejected at compile time") {
  CHECK_THROWS_AS(compile(parse("z1 + q"), {"t", "z1"}), UnboundVariable);
  try {
    compile(parse("z1 + q"), {"t", "z1"});
  } catch (const UnboundVariable& e) {
    CHECK(e.name() == "q");
    CHECK(e.offset() == 5);
  }
}

TEST_CASE("non-finite results raise") {
  Compiled c = compile(parse("1/t"), {"t"});
  const double slots[] = {0.0};
  CHECK_THROWS_AS(c.eval_checked(slots), NonFiniteResult);
}

TEST_CASE("compile folds constants and matches tree evaluation") {
  Compiled c = compile(parse("k*z1 + sin(w1)^2"), {"t", "z1", "w1"}, {{"k", 3.0}});
  CHECK_FALSE(c.is_constant());
  const double slots[] = {0.0, 2.0, 0.7};
  CHECK(c.eval(slots) == doctest::Approx(6.0 + std::sin(0.7) * std::sin(0.7)));
  CHECK(compile(parse("2*pi"), {}).is_constant());
}

TEST_CASE("print round trip is idempotent") {
  for (const char* src : {"sin(t)*z1 + 0.5*w1", "2^3^2", "-(x1 - 3)/max(1, w2)", "1 - -2", "0.1*cos(y1)^2"}) {
    const Expr a = parse(src);
    const Expr b = parse(a.print());
    CHECK(a == b);
    CHECK(b.print() == a.print());
  }
}

TEST_CASE("identifiers are sorted and unique") {
  auto ids = parse("z2 + z1*t + z2").identifiers();
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == "t");
  CHECK(ids[1] == "z1");
  CHECK(ids[2] == "z2");
}
