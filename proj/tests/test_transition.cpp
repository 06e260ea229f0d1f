#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "depcag/error.hpp"
#include "depcag/solve.hpp"
#include "depcag/transition.hpp"
#include "depcag/verify.hpp"
#include "support.hpp"

using namespace depcag;
using depcag::testing::constant_linear;
using depcag::testing::diag2;
using depcag::testing::scalar;

namespace {
NumericsConfig fine() {
  NumericsConfig n;
  n.ode_step = 0.005;
  return n;
}

// Composite Simpson of G(t, s) h over [a, b] with breaks at knots, anchors and t.
Vec green_integral(const TransitionOperator& op, const Mat& P, double t, double a, double b,
                   const std::function<Vec(double)>& h) {
  const TimeGrid& g = op.grid();
  std::vector<double> cuts{a, b, t};
  for (double k : g.knots) cuts.push_back(k);
  for (double z : g.anchors) cuts.push_back(z);
  std::sort(cuts.begin(), cuts.end());
  Vec acc = Vec::Zero(op.dim());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::max(a, cuts[i]), hi = std::min(b, cuts[i + 1]);
    if (!(hi > lo)) continue;
    const int m = 2 * std::max(2, static_cast<int>(std::ceil((hi - lo) / 0.02)));
    const double dh = (hi - lo) / m;
    // stay strictly inside the sub-interval so one-sided values are used
    for (int k = 0; k <= m; ++k) {
      double s = lo + k * dh;
      if (k == 0) s = lo + 1e-12;
      if (k == m) s = hi - 1e-12;
      const double w = (k == 0 || k == m) ? 1 : (k % 2 ? 4 : 2);
      acc += (w * dh / 3.0) * (op.green(t, s, P) * h(s));
    }
  }
  return acc;
}
}  // namespace

TEST_CASE("fundamental matrix against closed forms") {
  TransitionOperator dec(constant_linear(scalar(-1), scalar(0), -2, 4, 1.0, 0.0), fine());
  CHECK(dec.fundamental(1, 0)(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
  CHECK(dec.fundamental(0.3, 0.3)(0, 0) == 1.0);

  Mat rot(2, 2);
  rot << 0, 1, -1, 0;
  TransitionOperator r(constant_linear(rot, Mat::Zero(2, 2), 0, 4, 1.0, 0.0), fine());
  const Mat F = r.fundamental(std::numbers::pi / 2, 0);
  CHECK(F(0, 0) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(F(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(F(1, 0) == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(F.determinant() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("J and E for constant frozen coefficient") {
  const double m0 = 0.7;
  TransitionOperator op(constant_linear(scalar(0), scalar(m0), 0, 4, 1.0, 0.0), fine());
  CHECK(op.j_matrix(0.8, 0.1)(0, 0) == doctest::Approx(1 + m0 * 0.7).epsilon(1e-12));
  CHECK(op.j_matrix(0.4, 0.4)(0, 0) == 1.0);

  TransitionOperator one(constant_linear(scalar(0), scalar(1), 0, 4, 1.0, 0.0), fine());
  CHECK(one.e_matrix(0.5, 0.0)(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(one.e_matrix(0.25, 0.25)(0, 0) == doctest::Approx(1.0));

  TransitionOperator dec(constant_linear(scalar(-1), scalar(0), 0, 4, 1.0, 0.0), fine());
  CHECK(dec.e_matrix(0.9, 0.2)(0, 0) == doctest::Approx(std::exp(-0.7)).epsilon(1e-8));
}

TEST_CASE("singular J is reported") {
  // J(t, tau) = 1 - 2 (t - tau) vanishes at t - tau = 0.5
  TransitionOperator op(constant_linear(scalar(0), scalar(-2), 0, 2, 1.0, 0.0), fine());
  CHECK_THROWS_AS(op.j_matrix(0.5, 0.0), NumericError);
  CHECK(op.j_matrix(0.25, 0.0)(0, 0) == doctest::Approx(0.5));
  // J(t_{i+1}, zeta_i) = 0 makes the interval factor singular
  CHECK_THROWS_AS(TransitionOperator(constant_linear(scalar(0), scalar(-2), 0, 2, 0.5, 0.0), fine()),
                  NumericError);
}

TEST_CASE("transition matrix hand values") {
  TransitionOperator op(constant_linear(scalar(0), scalar(1), 0, 4, 1.0, 0.0), fine());
  CHECK(op.transition_z(1, 0)(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(op.transition_z(2, 0)(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(op.transition_z(2.5, 0)(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(op.transition_z(1.7, 1.7)(0, 0) == doctest::Approx(1.0));

  TransitionOperator sad(constant_linear(diag2(-1, 1), Mat::Zero(2, 2), 0, 4, 1.0, 0.5), fine());
  const Mat Z = sad.transition_z(3, 1);
  CHECK(Z(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-7));
  CHECK(Z(1, 1) == doctest::Approx(std::exp(2.0)).epsilon(1e-7));
  CHECK(std::fabs(Z(0, 1)) < 1e-12);
}

TEST_CASE("projected transition") {
  TransitionOperator sad(constant_linear(diag2(-1, 1), Mat::Zero(2, 2), 0, 4, 1.0, 0.5), fine());
  const Mat Zp = sad.z_split(2, 0, diag2(1, 0));
  CHECK(Zp(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
  CHECK(std::fabs(Zp(1, 1)) < 1e-12);
  CHECK((sad.z_split(2, 0, Mat::Zero(2, 2))).norm() < 1e-14);
  CHECK((sad.z_split(2, 0, Mat::Identity(2, 2)) - sad.transition_z(2, 0)).norm() < 1e-12);
}

TEST_CASE("cocycle and inverse on random triples") {
  Mat M(2, 2), M0(2, 2);
  M << -0.3, 1.0, -1.0, -0.3;
  M0 << 0.2, 0.0, 0.1, -0.2;
  TransitionOperator op(constant_linear(M, M0, -3, 3, 0.5, 0.3), fine());
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-3, 3);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const double t = u(rng), tau = u(rng), s = u(rng);
    worst = std::max(worst, norm(Mat(op.transition_z(t, tau) * op.transition_z(tau, s) - op.transition_z(t, s))));
    worst = std::max(worst, norm(Mat(op.transition_z(t, s) * op.transition_z(s, t) - Mat::Identity(2, 2))));
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("Green kernel branch values") {
  TransitionOperator op(constant_linear(scalar(-1), scalar(0), 0, 4, 1.0, 0.0), fine());
  const Mat P = scalar(1);
  CHECK(op.green(0.7, 0.6, P)(0, 0) == doctest::Approx(std::exp(-0.1)).epsilon(1e-8));
  // stable projection only: no future contribution
  CHECK(op.green(0.5, 2.3, P)(0, 0) == doctest::Approx(0.0));
  CHECK(op.green(2.5, 2.5, P)(0, 0) == doctest::Approx(1.0));
  CHECK(op.green(3.2, 1.4, P)(0, 0) == doctest::Approx(std::exp(-1.8)).epsilon(1e-8));

  // advanced anchor: for t in (t_j, zeta_j) and s in [t, zeta_j) the kernel vanishes
  TransitionOperator adv(constant_linear(scalar(-1), scalar(0), 0, 4, 1.0, 1.0), fine());
  CHECK(std::fabs(adv.green(1.2, 1.6, P)(0, 0)) < 1e-12);
}

TEST_CASE("Green integral reproduces bounded solutions") {
  // x' = -x + 1 and y' = y + 1: bounded solutions x = 1, y = -1
  TransitionOperator op(constant_linear(diag2(-1, 1), Mat::Zero(2, 2), -25, 25, 0.5, 0.3), fine());
  auto h = [](double) { return Vec::Ones(2); };
  for (double t : {-0.8, 0.0, 0.35, 1.9}) {
    const Vec v = green_integral(op, diag2(1, 0), t, -24.5, 24.5, h);
    CHECK(v(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(v(1) == doctest::Approx(-1.0).epsilon(1e-7));
  }
}

TEST_CASE("Green integral with a frozen argument solves the equation") {
  // The integral satisfies the variation of constants relation between two times.
  // Diagonal coefficients keep diag(1, 0) an invariant splitting.
  LinearDepcag lin = constant_linear(diag2(-1, 1), diag2(-0.1, 0.1), -25, 25, 0.5, 0.5);
  lin.M = [](double s) { return diag2(-1 + 0.3 * std::cos(s), 1.0); };
  TransitionOperator op(lin, fine());
  const Mat P = diag2(1, 0);
  auto h = [](double s) {
    Vec v(2);
    v << std::cos(s), 0.5 * std::sin(2 * s);
    return v;
  };
  const double tau = 0.0, t = 1.3;
  const Vec z0 = green_integral(op, P, tau, -24.5, 24.5, h);
  const Vec z1 = green_integral(op, P, t, -24.5, 24.5, h);
  const Vec voc = op.variation_of_constants(t, tau, z0, h);
  CHECK(norm(Vec(z1 - voc)) < 1e-8);

  PcaRhs rhs = make_rhs(lin);
  rhs.f = [lin, h](double s, const Vec& z, const Vec& c, Vec& out) { out = lin.M(s) * z + lin.M0(s) * c + h(s); };
  const Vec ivp = flow(rhs, tau, z0, t, fine());
  CHECK(norm(Vec(z1 - ivp)) < 1e-8);
}

TEST_CASE("Green kernel bound on random pairs") {
  LinearDepcag lin = constant_linear(scalar(-1), scalar(-0.1), -10, 10, 0.5, 0.5);
  TransitionOperator op(lin, fine());
  GrowthConstants gc = growth_constants(lin, 1.0, 0.005);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    double t = u(rng), s = u(rng);
    if (s > t) std::swap(s, t);
    worst = std::max(worst, norm(op.green(t, s, scalar(1))) / (gc.rho_tilde * std::exp(-(t - s))));
  }
  CHECK(worst <= 1.0);
}
