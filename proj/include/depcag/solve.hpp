#pragma once

#include <functional>

#include "depcag/model.hpp"
#include "depcag/trajectory.hpp"

namespace depcag {

// z'(t) = F(t, z(t), c) on [t_i, t_{i+1}) with c = z(zeta_i).
struct PcaRhs {
  TimeGrid grid;
  int dim = 0;
  std::function<void(double t, const Vec& z, const Vec& c, Vec& out)> f;
  // Contraction rate of the anchor fixed point; >= 1 means unknown.
  double upsilon = 1.0;
};

PcaRhs make_rhs(const DepcagSystem& s);
PcaRhs make_rhs(const LinearDepcag& s);
// Full block system; with_perturbation selects the full system over the reduced one, i.e.
// whether phi and psi are included.
PcaRhs make_rhs(const BlockSystem& s, bool with_perturbation);
// x' = A x + A0 x_gamma + f(t, x, x_gamma).
PcaRhs make_x_rhs(const BlockSystem& s);

// Initial value problem z(tau) = xi integrated to t_end in either direction.
// Knots crossed appear twice, left-sided derivative first.
Trajectory solve_ivp(const PcaRhs& rhs, double tau, const Vec& xi, double t_end,
                     const NumericsConfig& num);
Trajectory solve_ivp(const DepcagSystem& s, double tau, const Vec& xi, double t_end,
                     const NumericsConfig& num);

// Final state only.
Vec flow(const PcaRhs& rhs, double tau, const Vec& xi, double t_end, const NumericsConfig& num);

struct ContinuityReport {
  double lhs = 0, rhs = 0, p_l = 0;
  bool pass = true;
};

// |z(t,tau,xi') - z(t,tau,xi)| <= |xi - xi'| e^{p(l)|t - tau|} on the full system.
ContinuityReport continuity_bound_check(const BlockSystem& sys, const DichotomySpec& d,
                                        const NumericsConfig& num, double tau, const Vec& xi,
                                        const Vec& xi2, double t);

}  // namespace depcag
