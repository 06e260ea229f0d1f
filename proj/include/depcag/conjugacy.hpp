#pragma once

#include <json.hpp>
#include <memory>
#include <vector>

#include "depcag/green_operator.hpp"
#include "depcag/solve.hpp"
#include "depcag/transition.hpp"
#include "depcag/verify.hpp"

namespace depcag {

struct CrossingTime {
  double value = 0;
  double lo = 0, hi = 0;  // final bracket
  double residual = 0;    // | |X(value)| - 1 |
};

enum class Stage { Section6, Section7, Composed };

// Conjugacy maps between the block systems
//   full:    x' = A x + A0 x_g + f + phi,  y' = B y + B0 y_g + g + psi
//   reduced: the same without phi, psi
//   linear:  the linear part.
// H, L act between reduced and linear; H~, L~ between full and reduced.
// flow3, flow8 and flow5 are the full, reduced and linear flows.
class Conjugacy {
 public:
  Conjugacy(const BlockSystem& sys, const DichotomySpec& d, const NumericsConfig& num);

  const BlockSystem& system() const { return sys_; }
  const HypothesisReport& report() const { return report_; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }

  // Nonlinear x-flow X(t, t0, x0) and linear x-flow u(t, t0, xi) = Z1(t, t0) xi.
  Vec X(double t, double t0, const Vec& x0) const;
  Vec u(double t, double t0, const Vec& xi) const;
  CrossingTime crossing_T(double t0, const Vec& x0) const;
  CrossingTime crossing_S(double t0, const Vec& xi) const;

  Vec H1(double t, const Vec& x) const;
  Vec L1(double t, const Vec& xi) const;
  Vec H(double t, const Vec& z) const;
  Vec L(double t, const Vec& z) const;
  Vec Htilde(double t, const Vec& z) const;
  Vec Ltilde(double t, const Vec& z) const;
  Vec toward_linear(double t, const Vec& z) const { return H(t, Htilde(t, z)); }
  Vec toward_nonlinear(double t, const Vec& z) const { return Ltilde(t, L(t, z)); }
  Vec apply(Stage stage, bool inverse, double t, const Vec& z) const;

  // Full, reduced and linear flows from (t0, z0) to t.
  Vec flow3(double t, double t0, const Vec& z0) const;
  Vec flow8(double t, double t0, const Vec& z0) const;
  Vec flow5(double t, double t0, const Vec& z0) const;

  // Displacement bounds: sigma of the shifted system, and the bound on
  // |H2(t,x,y) - y| with the factor (1 + (1 - theta_bar) e^{alpha0 theta}).
  double sigma_bar() const { return shifted_->sigma(); }
  double h2_bound(const Vec& x) const;

 private:
  BlockSystem sys_;
  DichotomySpec d_;
  NumericsConfig num_;
  int n1_, n2_;
  HypothesisReport report_;
  PcaRhs x_rhs_, rhs3_, rhs8_;
  std::shared_ptr<const TransitionOperator> x_op_, y_op_, w_op_;
  std::unique_ptr<GreenSweep> y_sweep_;
  std::unique_ptr<BoundedSolver> shifted_;
  double alpha0_ = 0, theta_bar_ = 0, rho_tilde_b_ = 0;

  // w(t) = int G~_y(t,s) g(s, X(s,t,x), X(gamma(s),t,x)) ds, the bounded
  // y-response to the x-flow through (t, x).
  Vec y_response(double t, const Vec& x) const;
  // chi(t) of the shifted system through (t, z); to8 selects H~ over L~.
  Vec shifted_chi(double t, const Vec& z, bool to8) const;
};

struct ConjugacyOptions {
  int grid = 5;
  double radius = 3.0;
  double t0 = 0.0;
  double t_span = 5.0;
  int dynamics_states = 5;
  int dynamics_times = 5;
  double stage_tol = 1e-4;
  double composed_tol = 1e-3;
};

// Round trips, solution mapping, continuity probes and displacement bounds.
nlohmann::json conjugacy_report(const Conjugacy& c, const ConjugacyOptions& opt = {});

}  // namespace depcag
