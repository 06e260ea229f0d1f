#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "depcag/conjugacy.hpp"
#include "depcag/error.hpp"
#include "support.hpp"

using namespace depcag;
using depcag::testing::config_path;

namespace {
Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
  Vec z(2);
  z << a, b;
  return z;
}

struct Fixture {
  Config cfg;
  Conjugacy conj;
  explicit Fixture(const char* name)
      : cfg(load_config(config_path(name))),
        conj(std::get<BlockSystem>(cfg.system), cfg.dichotomy, cfg.numerics) {}
};

const Fixture& decay() {
  static Fixture f("pure_decay_block.json");
  return f;
}
const Fixture& perturbed() {
  static Fixture f("perturbed_block.json");
  return f;
}
const Fixture& linear() {
  static Fixture f("linear_block.json");
  return f;
}
}  // namespace

TEST_CASE("crossing times against the closed form") {
  const Conjugacy& c = decay().conj;
  CHECK(std::fabs(c.crossing_T(0.0, v1(std::numbers::e)).value - 1.0) <= 1e-6);
  CHECK(std::fabs(c.crossing_S(0.0, v1(std::numbers::e)).value - 1.0) <= 1e-6);
  CHECK(std::fabs(c.crossing_T(0.3, v1(-0.25)).value - (0.3 + std::log(0.25))) <= 1e-6);
  CHECK(c.crossing_T(0.7, v1(1.0)).value == 0.7);
  CHECK(c.crossing_S(0.7, v1(-1.0)).value == 0.7);
  CHECK(c.crossing_S(0.0, v1(1e-4)).value < c.crossing_S(0.0, v1(1e-2)).value);
  CrossingTime ct = c.crossing_T(0.0, v1(3.0));
  CHECK(ct.residual <= decay().cfg.numerics.crossing_tol * 10);
  CHECK(ct.lo <= ct.value);
  CHECK(ct.hi >= ct.value);
  CHECK_THROWS_AS(c.crossing_T(0.0, v1(0.0)), DomainError);
  CHECK_THROWS_AS(c.crossing_T(0.0, v1(1e30)), DomainError);
}

TEST_CASE("crossing times are invariant along flows") {
  const Conjugacy& c = perturbed().conj;
  const Vec x0 = v1(2.2);
  const double T0 = c.crossing_T(0.0, x0).value;
  const double S0 = c.crossing_S(0.0, x0).value;
  for (double t : {0.3, 1.7, -0.9}) {
    CHECK(std::fabs(c.crossing_T(t, c.X(t, 0.0, x0)).value - T0) <= 1e-6);
    CHECK(std::fabs(c.crossing_S(t, c.u(t, 0.0, x0)).value - S0) <= 1e-6);
  }
}

TEST_CASE("nonlinear x-flow decays at rate alpha0") {
  const Conjugacy& c = perturbed().conj;
  const double a0 = c.report().derived.at("alpha0");
  for (double x : {3.0, -0.4}) {
    for (double t : {0.25, 1.0, 2.5, 5.0}) {
      CHECK(norm(c.X(t, 0.0, v1(x))) <= std::fabs(x) * std::exp(-a0 * t));
    }
  }
}

TEST_CASE("crossing duality") {
  const Conjugacy& c = perturbed().conj;
  for (double x : {2.5, 0.3, -1.7}) {
    const double T = c.crossing_T(0.0, v1(x)).value;
    const Vec xi = c.H1(0.0, v1(x));
    CHECK(std::fabs(xi(0) - x) > 1e-6);  // the maps differ, so agreement is not trivial
    const double S = c.crossing_S(0.0, xi).value;
    CHECK(std::fabs(S - T) <= 1e-5);
  }
}

TEST_CASE("maps reduce to the identity without nonlinear terms") {
  const Conjugacy& c = decay().conj;
  for (const Vec& z : {v2(2.0, -1.0), v2(-0.3, 0.4), v2(0.0, 1.5)}) {
    CHECK(norm(Vec(c.H(0.2, z) - z)) < 1e-8);
    CHECK(norm(Vec(c.L(0.2, z) - z)) < 1e-8);
    CHECK(norm(Vec(c.Htilde(0.2, z) - z)) == 0.0);
    CHECK(norm(Vec(c.Ltilde(0.2, z) - z)) == 0.0);
  }
  CHECK(c.sigma_bar() == 0.0);
}

TEST_CASE("zero branch of H and L") {
  const Conjugacy& c = perturbed().conj;
  const Vec h = c.H(0.0, v2(0.0, 1.2));
  CHECK(h(0) == 0.0);
  CHECK(std::fabs(h(1) - 1.2) < 1e-12);
  const Vec l = c.L(0.0, v2(0.0, -0.7));
  CHECK(l(0) == 0.0);
  CHECK(std::fabs(l(1) + 0.7) < 1e-12);
  CHECK(c.H1(0.0, v1(0.0))(0) == 0.0);
  CHECK(c.L1(0.0, v1(0.0))(0) == 0.0);
}

TEST_CASE("stage round trips on a few states") {
  const Conjugacy& c = perturbed().conj;
  for (const Vec& z : {v2(1.5, -1.5), v2(-3.0, 0.0), v2(0.4, 2.9)}) {
    CAPTURE(z.transpose());
    CHECK(norm(Vec(c.L(0.0, c.H(0.0, z)) - z)) <= 1e-4);
    CHECK(norm(Vec(c.H(0.0, c.L(0.0, z)) - z)) <= 1e-4);
    CHECK(norm(Vec(c.Ltilde(0.0, c.Htilde(0.0, z)) - z)) <= 1e-4);
    CHECK(norm(Vec(c.Htilde(0.0, c.Ltilde(0.0, z)) - z)) <= 1e-4);
    CHECK(norm(Vec(c.toward_nonlinear(0.0, c.toward_linear(0.0, z)) - z)) <= 1e-3);
  }
}

TEST_CASE("displacement bounds") {
  const Conjugacy& c = perturbed().conj;
  for (const Vec& z : {v2(1.5, -1.5), v2(-3.0, 0.5), v2(0.2, 3.0)}) {
    CHECK(norm(Vec(c.Htilde(0.0, z) - z)) <= c.sigma_bar());
    CHECK(norm(Vec(c.Ltilde(0.0, z) - z)) <= c.sigma_bar());
    const Vec h = c.H(0.0, z);
    CHECK(std::fabs(h(1) - z(1)) <= c.h2_bound(z.head(1)));
  }
}

TEST_CASE("stage maps send solutions to solutions") {
  const Conjugacy& c = perturbed().conj;
  const Vec z0 = v2(1.2, 0.01);
  const Vec h0 = c.H(0.0, z0), ht0 = c.Htilde(0.0, z0);
  for (double t : {1.0, 2.5}) {
    CHECK(norm(Vec(c.H(t, c.flow8(t, 0.0, z0)) - c.flow5(t, 0.0, h0))) <= 1e-5);
    CHECK(norm(Vec(c.Htilde(t, c.flow3(t, 0.0, z0)) - c.flow8(t, 0.0, ht0))) <= 1e-5);
  }
}

TEST_CASE("stage selection and inverse flags") {
  const Conjugacy& c = perturbed().conj;
  const Vec z = v2(0.9, -0.6);
  CHECK(norm(Vec(c.apply(Stage::Section6, false, 0.0, z) - c.H(0.0, z))) == 0.0);
  CHECK(norm(Vec(c.apply(Stage::Section6, true, 0.0, z) - c.L(0.0, z))) == 0.0);
  CHECK(norm(Vec(c.apply(Stage::Section7, false, 0.0, z) - c.Htilde(0.0, z))) == 0.0);
  CHECK(norm(Vec(c.apply(Stage::Section7, true, 0.0, z) - c.Ltilde(0.0, z))) == 0.0);
  CHECK(norm(Vec(c.apply(Stage::Composed, false, 0.0, z) - c.toward_linear(0.0, z))) == 0.0);
}

TEST_CASE("linear reduction report is exact to quadrature noise") {
  ConjugacyOptions opt;
  opt.grid = 3;
  opt.dynamics_states = 2;
  opt.dynamics_times = 2;
  nlohmann::json r = conjugacy_report(linear().conj, opt);
  CHECK(r["all_pass"] == true);
  for (const auto& [k, v] : r["round_trip"].items()) CHECK(v.get<double>() < 1e-8);
  for (const auto& [k, v] : r["dynamics"].items()) CHECK(v.get<double>() < 1e-8);
  CHECK(r["continuity"]["H1_decreasing"] == true);
}

TEST_CASE("failing hypotheses are named") {
  Config cfg = load_config(config_path("perturbed_block.json"));
  auto b = std::get<BlockSystem>(cfg.system);
  b.omega = 0.2;
  b.lambda = 0.2;
  try {
    Conjugacy bad(b, cfg.dichotomy, cfg.numerics);
    FAIL("expected HypothesisError");
  } catch (const HypothesisError& e) {
    CHECK(e.condition() == "eq11");
  }
}
