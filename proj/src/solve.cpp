#include "depcag/solve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depcag/error.hpp"
#include "depcag/verify.hpp"

namespace depcag {

PcaRhs make_rhs(const DepcagSystem& s) {
  PcaRhs r;
  r.grid = s.grid;
  r.dim = s.dim();
  auto h = s.h;
  MatrixExpr M = s.M, M0 = s.M0;
  r.f = [M, M0, h](double t, const Vec& z, const Vec& c, Vec& out) {
    out = M(t) * z + M0(t) * c;
    if (h) out += (*h)(t, z, c);
  };
  const LinearDepcag lin = linear_part(s);
  r.upsilon = upsilon(sampled_sup_norm(lin.M, s.grid), sampled_sup_norm(lin.M0, s.grid),
                      h ? h->lipschitz_l : 0.0, s.grid.theta);
  return r;
}

PcaRhs make_rhs(const LinearDepcag& s) {
  PcaRhs r;
  r.grid = s.grid;
  r.dim = s.dim;
  MatrixFn M = s.M, M0 = s.M0;
  r.f = [M, M0](double t, const Vec& z, const Vec& c, Vec& out) { out = M(t) * z + M0(t) * c; };
  r.upsilon = upsilon(sampled_sup_norm(M, s.grid), sampled_sup_norm(M0, s.grid), 0.0, s.grid.theta);
  return r;
}

PcaRhs make_rhs(const BlockSystem& s, bool with_perturbation) {
  PcaRhs r;
  r.grid = s.grid;
  const int n1 = s.n1(), n2 = s.n2();
  r.dim = n1 + n2;
  r.f = [s, n1, n2, with_perturbation](double t, const Vec& z, const Vec& c, Vec& out) {
    const Vec x = z.head(n1), y = z.tail(n2), cx = c.head(n1), cy = c.tail(n2);
    out.resize(n1 + n2);
    out.head(n1) = s.A(t) * x + s.A0(t) * cx + s.f(t, x, cx);
    out.tail(n2) = s.B(t) * y + s.B0(t) * cy + s.g(t, x, cx);
    if (with_perturbation) {
      out.head(n1) += s.phi(t, y, cy);
      out.tail(n2) += s.psi(t, y, cy);
    }
  };
  r.upsilon = upsilon(s.beta, s.beta0, s.omega, s.grid.theta);
  return r;
}

PcaRhs make_x_rhs(const BlockSystem& s) {
  PcaRhs r;
  r.grid = s.grid;
  r.dim = s.n1();
  MatrixExpr A = s.A, A0 = s.A0;
  NonlinearTerm f = s.f;
  r.f = [A, A0, f](double t, const Vec& x, const Vec& c, Vec& out) {
    out = A(t) * x + A0(t) * c + f(t, x, c);
  };
  r.upsilon = upsilon(s.beta, s.beta0, s.omega, s.grid.theta);
  return r;
}

namespace {

struct Stepper {
  const PcaRhs& rhs;
  double h;
  Vec k1, k2, k3, k4;

  // RK4 with the anchor value c frozen; optional recording of every step.
  Vec run(double a, double b, Vec z, const Vec& c, Trajectory* rec) {
    if (a == b) return z;
    const int n = std::max(1, static_cast<int>(std::ceil(std::fabs(b - a) / h - 1e-9)));
    const double dt = (b - a) / n;
    for (int k = 0; k < n; ++k) {
      const double t = a + k * dt;
      const double te = k + 1 == n ? b : t + dt;
      rhs.f(t, z, c, k1);
      rhs.f(t + 0.5 * dt, z + 0.5 * dt * k1, c, k2);
      rhs.f(t + 0.5 * dt, z + 0.5 * dt * k2, c, k3);
      rhs.f(te, z + dt * k3, c, k4);
      z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!z.allFinite())
        throw NumericError("non-finite state while integrating near t = " + std::to_string(te));
      if (rec) {
        Vec d;
        rhs.f(te, z, c, d);
        rec->push(te, z, d);
      }
    }
    return z;
  }
};

int iteration_cap(double ups, const NumericsConfig& num) {
  if (ups > 0 && ups < 1)
    return std::min(num.max_iters,
                    static_cast<int>(std::ceil(std::log(num.fp_tol) / std::log(ups))) + 5);
  return num.max_iters;
}

}  // namespace

Trajectory solve_ivp(const PcaRhs& rhs, double tau, const Vec& xi, double t_end,
                     const NumericsConfig& num) {
  const TimeGrid& g = rhs.grid;
  if (!g.contains(tau) || !g.contains(t_end))
    throw DomainError("solve_ivp: times must lie in the working window [" + std::to_string(g.t_min()) +
                      ", " + std::to_string(g.t_max()) + "]");
  if (xi.size() != rhs.dim) throw DomainError("solve_ivp: initial state has the wrong dimension");
  const bool forward = t_end >= tau;
  const int cap = iteration_cap(rhs.upsilon, num);
  Trajectory tr;
  Vec z = xi;
  double cur = tau;
  bool first = true;
  auto anchor_fp = [&](int i, double from, const Vec& zf, Stepper& st) {
    const double zeta = g.anchors[i];
    Vec c = zf;
    if (zeta == from) return std::pair{c, 0};
    for (int it = 1; it <= cap; ++it) {
      Vec next = st.run(from, zeta, zf, c, nullptr);
      const double dc = norm(Vec(next - c));
      c = std::move(next);
      if (dc <= num.fp_tol * std::max(1.0, norm(c))) return std::pair{c, it};
    }
    throw NumericError("anchor fixed point did not converge in " + std::to_string(cap) +
                       " iterations at interval " + std::to_string(i) +
                       (forward ? "" : " (backward step; interval factor may be singular)"));
  };
  do {
    const int i = forward ? g.interval_of(cur) : g.interval_of_left(cur);
    const double end = forward ? std::min(t_end, g.knots[i + 1]) : std::max(t_end, g.knots[i]);
    Stepper st{rhs, std::min(num.ode_step, g.length(i) / 8.0), {}, {}, {}, {}};
    auto [c, iters] = anchor_fp(i, cur, z, st);
    tr.anchor_values[i] = c;
    tr.fp_iterations[i] = iters;
    {
      Vec d;
      rhs.f(cur, z, c, d);
      if (first || end != cur) tr.push(cur, z, d);
      first = false;
    }
    const double zeta = g.anchors[i];
    const bool split = forward ? (zeta > cur && zeta < end) : (zeta < cur && zeta > end);
    if (split) {
      z = st.run(cur, zeta, z, c, &tr);
      z = st.run(zeta, end, z, c, &tr);
    } else {
      z = st.run(cur, end, z, c, &tr);
    }
    cur = end;
  } while (forward ? cur < t_end : cur > t_end);
  if (!forward) tr.reverse();
  return tr;
}

Trajectory solve_ivp(const DepcagSystem& s, double tau, const Vec& xi, double t_end,
                     const NumericsConfig& num) {
  return solve_ivp(make_rhs(s), tau, xi, t_end, num);
}

Vec flow(const PcaRhs& rhs, double tau, const Vec& xi, double t_end, const NumericsConfig& num) {
  Trajectory tr = solve_ivp(rhs, tau, xi, t_end, num);
  return tr.times.front() == t_end ? tr.values.front() : tr.values.back();
}

ContinuityReport continuity_bound_check(const BlockSystem& sys, const DichotomySpec& d,
                                        const NumericsConfig& num, double tau, const Vec& xi,
                                        const Vec& xi2, double t) {
  ContinuityReport rep;
  HypothesisReport h = check_theorem2(sys, d, num);
  rep.p_l = h.derived.at("p_l");
  const PcaRhs rhs = make_rhs(sys, true);
  rep.lhs = norm(Vec(flow(rhs, tau, xi2, t, num) - flow(rhs, tau, xi, t, num)));
  rep.rhs = norm(Vec(xi - xi2)) * std::exp(rep.p_l * std::fabs(t - tau));
  rep.pass = rep.lhs <= rep.rhs;
  return rep;
}

}  // namespace depcag
