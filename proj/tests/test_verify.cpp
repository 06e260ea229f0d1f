#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "depcag/solve.hpp"
#include "depcag/transition.hpp"
#include "depcag/verify.hpp"
#include "support.hpp"

using namespace depcag;
using depcag::testing::config_path;
using depcag::testing::constant_linear;
using depcag::testing::diag2;
using depcag::testing::scalar;

namespace {
constexpr double kE = std::numbers::e;

DichotomySpec spec(Mat P, double K, double alpha) {
  DichotomySpec d;
  d.P = std::move(P);
  d.K = K;
  d.alpha = alpha;
  return d;
}
}  // namespace

TEST_CASE("growth constants: frozen coefficient only") {
  GrowthConstants gc = growth_constants(constant_linear(scalar(0), scalar(-0.5), 0, 6, 1.0, 0.0), 1.0, 0.01);
  CHECK(gc.nu_plus == doctest::Approx(0.0));
  CHECK(gc.nu_minus == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(gc.rho == doctest::Approx(1.0));
  CHECK(gc.condition_c);
  for (double v : gc.rho_plus_M) CHECK(v == doctest::Approx(1.0));
  // rho0 = rho^2 (1 + nu-) / (1 - nu+)
  CHECK(gc.rho0 == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("growth constants: zero system") {
  GrowthConstants gc = growth_constants(constant_linear(scalar(0), scalar(0), 0, 6, 1.0, 0.5), 1.0, 0.01);
  CHECK(gc.rho == 1.0);
  CHECK(gc.rho0 == 1.0);
  CHECK(gc.nu_plus == 0.0);
  CHECK(gc.nu_minus == 0.0);
  CHECK(gc.rho_star == doctest::Approx(kE));
}

TEST_CASE("growth constants: scalar decay") {
  GrowthConstants gc = growth_constants(constant_linear(scalar(-1), scalar(0), 0, 6, 1.0, 0.0), 1.0, 0.01);
  for (double v : gc.rho_plus_M) CHECK(v == doctest::Approx(1.0));
  for (double v : gc.rho_minus_M) CHECK(v == doctest::Approx(kE).epsilon(1e-10));
  CHECK(gc.rho == doctest::Approx(kE).epsilon(1e-10));
  CHECK(gc.rho_star == doctest::Approx(kE * kE).epsilon(1e-10));
  CHECK(gc.rho_tilde == doctest::Approx(std::max(std::pow(kE, 3), kE * kE)).epsilon(1e-10));
}

TEST_CASE("bounded-solution hypothesis arithmetic") {
  GrowthConstants gc;
  gc.rho_star = kE;
  gc.rho_tilde = kE;
  DichotomySpec d = spec(scalar(1), 1.0, 1.0);
  HypothesisReport r = check_theorem1(gc, d, 0.01, 0.0, 0.01, 1.0);
  const CheckEntry* a = r.find("eq10a");
  REQUIRE(a);
  CHECK(a->lhs == doctest::Approx(8 * 0.01 * kE));
  CHECK(a->lhs == doctest::Approx(0.2175).epsilon(1e-3));
  CHECK(a->pass);
  CHECK(r.find("eq10b")->lhs == doctest::Approx(4 * 0.01 * kE));
  CHECK(r.all_pass());

  HypothesisReport z = check_theorem1(gc, d, 0.0, 0.3, 0.0, 1.0);
  CHECK(z.all_pass());
  CHECK(z.derived.at("sigma") == doctest::Approx(2 * 0.3 * kE));

  gc.rho_tilde = 3 * kE;
  HypothesisReport bad = check_theorem1(gc, d, 0.09, 0.0, 0.0, 1.0);
  CHECK_FALSE(bad.all_pass());
  CHECK(bad.find("eq10b")->pass);
  CHECK(bad.first_failure() == "sigma_denominator");
  CHECK(bad.find("sigma_denominator")->lhs == doctest::Approx(1 - 4 * 0.09 * 3 * kE));
}

TEST_CASE("bounded-solution hypotheses on the scalar decay config") {
  Config c = load_config(config_path("scalar_decay.json"));
  HypothesisReport r = check_theorem1(std::get<DepcagSystem>(c.system), c.dichotomy, c.numerics);
  CHECK(r.all_pass());
  // theta = 0.1, zeta_i = t_i: rho = e^{0.1}, rho0 = rho^3, rho* = rho e^{0.1}
  const double rt = std::exp(0.3);
  CHECK(r.derived.at("rho_tilde") == doctest::Approx(rt).epsilon(1e-8));
  CHECK(r.derived.at("sigma") == doctest::Approx(2 * 0.1 * rt / (1 - 0.4 * rt)).epsilon(1e-8));
}

TEST_CASE("contraction factor arithmetic") {
  CHECK(f_factor(1.0, 0.01, 1.0) == doctest::Approx((std::exp(1.01) - 1) / 1.01));
  // (e^{1.01} - 1) / 1.01 = 1.7283178..., upsilon = 0.017283178...
  CHECK(f_factor(1.0, 0.01, 1.0) == doctest::Approx(1.7283178).epsilon(1e-7));
  CHECK(upsilon(1.0, 0.0, 0.01, 1.0) == doctest::Approx(0.017283178).epsilon(1e-7));
  CHECK(upsilon(1.0, 0.5, 0.01, 0.01) == doctest::Approx(0.0051).epsilon(0.02));
  CHECK(f_factor(0.0, 0.0, 1.0) == 1.0);
}

TEST_CASE("conjugacy hypotheses on the perturbed block config") {
  Config c = load_config(config_path("perturbed_block.json"));
  HypothesisReport r = check_theorem2(std::get<BlockSystem>(c.system), c.dichotomy, c.numerics);
  CHECK(r.all_pass());
  // hand values: theta = 0.5 with mid anchors, A = -1, A0 = -0.1, omega = 0.01
  const double rho = std::exp(0.5);                 // rho+ rho- = e^{0.25} e^{0.25}
  const double nu = std::exp(0.25) * 0.1 * 0.25;    // rho+(M) int |M0|
  const double rho0 = rho * rho * (1 + nu) / (1 - nu);
  const double rt = std::max(rho * rho0, rho * std::exp(0.5));
  CHECK(r.derived.at("rho_tilde_A") == doctest::Approx(rt).epsilon(1e-6));
  CHECK(r.derived.at("alpha0") == doctest::Approx(1 - 2 * 0.01 * rt * std::exp(0.5)).epsilon(1e-6));
  CHECK(r.derived.at("upsilon") == doctest::Approx(upsilon(1.0, 0.1, 0.01, 0.5)).epsilon(1e-12));
  CHECK(r.find("eq11")->lhs == doctest::Approx(8 * 0.01 * rt).epsilon(1e-6));
  CHECK(r.find("eq12")->lhs == doctest::Approx(16 * 0.01 * rt).epsilon(1e-6));
}

TEST_CASE("conjugacy hypotheses with omega = 0 keep alpha0 = alpha") {
  Config c = load_config(config_path("pure_decay_block.json"));
  HypothesisReport r = check_theorem2(std::get<BlockSystem>(c.system), c.dichotomy, c.numerics);
  CHECK(r.all_pass());
  CHECK(r.derived.at("alpha0") == doctest::Approx(1.0));
  CHECK(r.find("eq11")->lhs == 0.0);
}

TEST_CASE("dichotomy checker calibration") {
  NumericsConfig num;
  TransitionOperator sad(constant_linear(diag2(-1, 1), Mat::Zero(2, 2), -10, 10, 0.5, 0.5), num);
  DichotomyReport ok = check_dichotomy(sad, spec(diag2(1, 0), 1.0, 1.0), 400, 0);
  CHECK(ok.pass);
  CHECK(ok.samples >= 400);
  CHECK(ok.fitted_alpha == doctest::Approx(1.0).epsilon(0.05));

  // projecting onto the unstable branch fails
  DichotomyReport wrong = check_dichotomy(sad, spec(diag2(0, 1), 1.0, 1.0), 400, 0);
  CHECK_FALSE(wrong.pass);

  TransitionOperator grow(constant_linear(scalar(1), scalar(0), -10, 10, 0.5, 0.5), num);
  CHECK_FALSE(check_dichotomy(grow, spec(scalar(1), 1.0, 0.1), 200, 0).pass);
  CHECK_FALSE(check_dichotomy(grow, spec(scalar(1), 100.0, 0.01), 200, 0).pass);
}

TEST_CASE("dichotomy fit of the halving system") {
  // Z(i+1, i) = 1/2 so the fitted rate is ln 2
  TransitionOperator op(constant_linear(scalar(0), scalar(-0.5), 0, 20, 1.0, 0.0), NumericsConfig{});
  DichotomyReport r = check_dichotomy(op, spec(scalar(1), 2.0, 0.5), 400, 0);
  CHECK(r.pass);
  CHECK(r.fitted_alpha == doctest::Approx(std::log(2.0)).epsilon(0.1));
  CHECK(std::fabs(op.transition_z(5, 0)(0, 0) - std::pow(0.5, 5)) < 1e-12);
}

TEST_CASE("sampling is reproducible for a fixed seed") {
  TransitionOperator sad(constant_linear(diag2(-1, 1), Mat::Zero(2, 2), -10, 10, 0.5, 0.5), NumericsConfig{});
  DichotomyReport a = check_dichotomy(sad, spec(diag2(1, 0), 1.0, 1.0), 100, 5);
  DichotomyReport b = check_dichotomy(sad, spec(diag2(1, 0), 1.0, 1.0), 100, 5);
  CHECK(a.worst_ratio == b.worst_ratio);
  CHECK(a.fitted_alpha == b.fitted_alpha);
}

TEST_CASE("Gronwall premise values") {
  TimeGrid g = TimeGrid::uniform(0, 10, 1.0, 0.5);
  GronwallReport small = gronwall_premise(g, "0.2");
  CHECK(small.premise);
  CHECK(std::fabs(small.theta_bar - 0.4) <= 1e-10);
  CHECK(std::fabs(small.theta_tilde - 8.0 / 3.0) <= 1e-10);
  GronwallReport zero = gronwall_premise(g, "0");
  CHECK(zero.theta_bar == 0.0);
  CHECK(zero.theta_tilde == 2.0);
  GronwallReport large = gronwall_premise(g, "0.6");
  CHECK_FALSE(large.premise);
  CHECK(std::fabs(large.theta_bar - 1.2) <= 1e-10);
}

TEST_CASE("Gronwall conclusions on simulated trajectories") {
  Config c = load_config(config_path("gronwall_small.json"));
  const auto& s = std::get<DepcagSystem>(c.system);
  for (double x0 : {1.0, -0.4, 2.5}) {
    Vec xi(1);
    xi << x0;
    Trajectory tr = solve_ivp(s, 1.3, xi, 8.7, c.numerics);
    GronwallReport r = gronwall_check(tr, s.grid, "0.2");
    CHECK(r.premise);
    CHECK(r.conclusions_hold);
    CHECK(r.pairs_checked > 100);
  }
  // eta = 0 on a decaying trajectory: rho(t) <= rho(tau) for t >= tau
  Config d = load_config(config_path("scalar_decay.json"));
  Vec xi(1);
  xi << 1.0;
  Trajectory tr = solve_ivp(std::get<DepcagSystem>(d.system), 0.0, xi, 5.0, d.numerics);
  GronwallReport r = gronwall_check(tr, d.grid(), "0");
  CHECK(r.conclusions_hold);
  CHECK(r.theta_tilde == 2.0);
}

TEST_CASE("verify_config on the example configs") {
  Config ok = load_config(config_path("scalar_decay.json"));
  HypothesisReport r = verify_config(ok, 0);
  CHECK(r.all_pass());
  CHECK(r.find("eq10a")->pass);
  nlohmann::json j = r.to_json();
  CHECK(j["checks"]["eq10a"]["pass"] == true);
  CHECK(j["all_pass"] == true);

  HypothesisReport g = verify_config(load_config(config_path("gronwall_large.json")), 0);
  CHECK_FALSE(g.all_pass());
  CHECK(g.first_failure() == "gronwall_premise");

  HypothesisReport b = verify_config(load_config(config_path("perturbed_block.json")), 0);
  CHECK(b.all_pass());
  CHECK(b.find("frakD")->pass);
}
