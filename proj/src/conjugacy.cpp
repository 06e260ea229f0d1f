#include "depcag/conjugacy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depcag/error.hpp"

namespace depcag {

using nlohmann::json;

namespace {

// Time where a norm that is strictly decreasing in time reaches 1, starting
// from t0. `segment(t1)` returns s -> |state(s)| valid between t0 and t1.
template <class Segment>
CrossingTime find_crossing(double t0, double n0, const TimeGrid& g, double tol, Segment&& segment) {
  CrossingTime ct{t0, t0, t0, std::fabs(n0 - 1.0)};
  if (n0 == 1.0) return ct;
  const int dir = n0 > 1.0 ? 1 : -1;
  double d = g.theta, prev = t0;
  for (;;) {
    double t1 = t0 + dir * d;
    bool clamped = false;
    if (t1 > g.t_max()) t1 = g.t_max(), clamped = true;
    if (t1 < g.t_min()) t1 = g.t_min(), clamped = true;
    auto fn = segment(t1);
    const double v = fn(t1);
    const bool crossed = dir > 0 ? v <= 1.0 : v >= 1.0;
    if (crossed) {
      double a = std::min(prev, t1), b = std::max(prev, t1);
      for (int it = 0; it < 200 && b - a > tol; ++it) {
        const double m = 0.5 * (a + b);
        if (fn(m) > 1.0) a = m;
        else b = m;
      }
      ct.lo = a;
      ct.hi = b;
      ct.value = 0.5 * (a + b);
      ct.residual = std::fabs(fn(ct.value) - 1.0);
      return ct;
    }
    if (clamped || t1 == prev) throw DomainError("crossing bracket exits the working window");
    prev = t1;
    d *= 2;
  }
}

// Piecewise access to a solution split at its base time.
struct TwoSided {
  Trajectory fwd, bwd;
  double base;
  Vec at(double s) const { return s >= base ? fwd.at(s) : bwd.at(s); }
  const Vec& anchor(int r) const {
    auto it = fwd.anchor_values.find(r);
    if (it != fwd.anchor_values.end()) return it->second;
    return bwd.anchor(r);
  }
};

TwoSided solve_both(const PcaRhs& rhs, double t, const Vec& z, double lo, double hi,
                    const NumericsConfig& num) {
  return {solve_ivp(rhs, t, z, hi, num), solve_ivp(rhs, t, z, lo, num), t};
}

}  // namespace

Conjugacy::Conjugacy(const BlockSystem& sys, const DichotomySpec& d, const NumericsConfig& num)
    : sys_(sys), d_(d), num_(num), n1_(sys.n1()), n2_(sys.n2()) {
  report_ = check_theorem2(sys, d, num);
  if (!report_.all_pass()) {
    const std::string name = report_.first_failure();
    throw HypothesisError(name, "conjugacy hypotheses fail: " + name + " (" + report_.find(name)->inequality + ")");
  }
  alpha0_ = report_.derived.at("alpha0");
  theta_bar_ = report_.derived.at("theta_bar");
  rho_tilde_b_ = report_.derived.at("rho_tilde_B");
  x_rhs_ = make_x_rhs(sys);
  rhs3_ = make_rhs(sys, true);
  rhs8_ = make_rhs(sys, false);
  x_op_ = std::make_shared<TransitionOperator>(x_block(sys), num);
  y_op_ = std::make_shared<TransitionOperator>(y_block(sys), num);
  y_sweep_ = std::make_unique<GreenSweep>(y_op_, Mat::Zero(n2_, n2_), BoundedSolver::node_step_for(sys.grid, num));
  shifted_ = std::make_unique<BoundedSolver>(full_linear(sys), d, num, 2 * sys.lambda, 4 * sys.delta,
                                             2 * sys.omega);
}

Vec Conjugacy::X(double t, double t0, const Vec& x0) const { return flow(x_rhs_, t0, x0, t, num_); }

Vec Conjugacy::u(double t, double t0, const Vec& xi) const { return x_op_->transition_z(t, t0) * xi; }

CrossingTime Conjugacy::crossing_T(double t0, const Vec& x0) const {
  const double n0 = norm(x0);
  if (n0 == 0) throw DomainError("crossing time T is undefined at x0 = 0");
  return find_crossing(t0, n0, sys_.grid, num_.crossing_tol, [&](double t1) {
    auto tr = std::make_shared<Trajectory>(solve_ivp(x_rhs_, t0, x0, t1, num_));
    return [tr](double s) { return norm(tr->at(s)); };
  });
}

CrossingTime Conjugacy::crossing_S(double t0, const Vec& xi) const {
  const double n0 = norm(xi);
  if (n0 == 0) throw DomainError("crossing time S is undefined at xi = 0");
  return find_crossing(t0, n0, sys_.grid, num_.crossing_tol,
                       [&](double) { return [&](double s) { return norm(u(s, t0, xi)); }; });
}

Vec Conjugacy::H1(double t, const Vec& x) const {
  if (norm(x) == 0) return Vec::Zero(n1_);
  const double T = crossing_T(t, x).value;
  return u(t, T, X(T, t, x));
}

Vec Conjugacy::L1(double t, const Vec& xi) const {
  if (norm(xi) == 0) return Vec::Zero(n1_);
  const double S = crossing_S(t, xi).value;
  return X(t, S, u(S, t, xi));
}

Vec Conjugacy::y_response(double t, const Vec& x) const {
  const TimeGrid& g = sys_.grid;
  const double a2 = d_.alpha + alpha0_;
  const double c = d_.K * sys_.lambda * rho_tilde_b_ *
                   (1 + std::exp(alpha0_ * g.theta) / std::max(1e-12, 1 - theta_bar_)) * norm(x) / a2;
  double T2 = c > num_.tail_tol ? std::log(c / num_.tail_tol) / a2 : 0.0;
  T2 = std::max(T2, g.theta) + g.theta;
  const double hi = t + T2;
  if (hi > g.t_max())
    throw DomainError("y-response horizon " + std::to_string(T2) + " from t = " + std::to_string(t) +
                      " exceeds the working window");
  const double lo = g.knots[g.interval_of(t)];
  const TwoSided xs = solve_both(x_rhs_, t, x, lo, std::min(g.t_max(), hi + g.theta), num_);
  Source src = [&](double s, int, int r) -> Vec { return sys_.g(s, xs.at(s), xs.anchor(r)); };
  return y_sweep_->value_at(t, src, lo, hi);
}

Vec Conjugacy::H(double t, const Vec& z) const {
  const Vec x = z.head(n1_), y = z.tail(n2_);
  Vec out(n1_ + n2_);
  out.head(n1_) = H1(t, x);
  out.tail(n2_) = y - y_response(t, x);
  return out;
}

Vec Conjugacy::L(double t, const Vec& z) const {
  const Vec xi = z.head(n1_), eta = z.tail(n2_);
  Vec out(n1_ + n2_);
  const Vec x1 = L1(t, xi);
  out.head(n1_) = x1;
  out.tail(n2_) = eta + y_response(t, x1);
  return out;
}

Vec Conjugacy::shifted_chi(double t, const Vec& z, bool to8) const {
  const TimeGrid& g = sys_.grid;
  const double Th = shifted_->horizon();
  const double R = Th + g.theta;
  const double lo = std::max(g.t_min(), t - R), hi = std::min(g.t_max(), t + R);
  if (t - Th < lo || t + Th > hi)
    throw DomainError("shifted-system horizon " + std::to_string(Th) + " around t = " + std::to_string(t) +
                      " exceeds the working window");
  const PcaRhs& src_rhs = to8 ? rhs3_ : rhs8_;
  const TwoSided ref = solve_both(src_rhs, t, z, std::max(g.t_min(), lo - g.theta),
                                  std::min(g.t_max(), hi + g.theta), num_);
  const int n1 = n1_, n2 = n2_;
  const BlockSystem& s = sys_;
  Forcing h = [&, n1, n2](double tt, int r, const Vec& zc, const Vec& wc) -> Vec {
    const Vec rs = ref.at(tt);
    const Vec& rg = ref.anchor(r);
    const Vec xb = rs.head(n1), yb = rs.tail(n2), xg = rg.head(n1), yg = rg.tail(n2);
    const Vec xs = xb + zc.head(n1), xsg = xg + wc.head(n1);
    Vec out(n1 + n2);
    out.head(n1) = s.f(tt, xs, xsg) - s.f(tt, xb, xg);
    out.tail(n2) = s.g(tt, xs, xsg) - s.g(tt, xb, xg);
    if (to8) {
      out.head(n1) -= s.phi(tt, yb, yg);
      out.tail(n2) -= s.psi(tt, yb, yg);
    } else {
      const Vec ys = yb + zc.tail(n2), ysg = yg + wc.tail(n2);
      out.head(n1) += s.phi(tt, ys, ysg);
      out.tail(n2) += s.psi(tt, ys, ysg);
    }
    return out;
  };
  PicardOptions opt;
  opt.support = std::pair{lo, hi};
  return shifted_->solve(h, opt).at(t);
}

Vec Conjugacy::Htilde(double t, const Vec& z) const { return z + shifted_chi(t, z, true); }
Vec Conjugacy::Ltilde(double t, const Vec& z) const { return z + shifted_chi(t, z, false); }

Vec Conjugacy::apply(Stage stage, bool inverse, double t, const Vec& z) const {
  switch (stage) {
    case Stage::Section6: return inverse ? L(t, z) : H(t, z);
    case Stage::Section7: return inverse ? Ltilde(t, z) : Htilde(t, z);
    case Stage::Composed: return inverse ? toward_nonlinear(t, z) : toward_linear(t, z);
  }
  return z;
}

Vec Conjugacy::flow3(double t, double t0, const Vec& z0) const { return flow(rhs3_, t0, z0, t, num_); }
Vec Conjugacy::flow8(double t, double t0, const Vec& z0) const { return flow(rhs8_, t0, z0, t, num_); }
Vec Conjugacy::flow5(double t, double t0, const Vec& z0) const {
  return shifted_->op().transition_z(t, t0) * z0;
}

double Conjugacy::h2_bound(const Vec& x) const {
  return d_.K * sys_.lambda * rho_tilde_b_ * (1 + (1 - theta_bar_) * std::exp(alpha0_ * sys_.grid.theta)) *
         norm(x) / (d_.alpha + alpha0_);
}

// ---------------------------------------------------------------- report

json conjugacy_report(const Conjugacy& c, const ConjugacyOptions& opt) {
  const int n1 = c.n1(), n2 = c.n2(), n = n1 + n2;
  const double t0 = opt.t0;
  auto state = [&](double a, double b) {
    Vec z = Vec::Zero(n);
    z(0) = a;
    z(n1) = b;
    return z;
  };
  auto dist = [](const Vec& a, const Vec& b) { return norm(Vec(a - b)); };

  double lh = 0, hl = 0, lt_ht = 0, ht_lt = 0, comp_a = 0, comp_b = 0;
  double disp_ht = 0, disp_lt = 0, h2_ratio = 0, h2_excess = -1e300, duality = 0;
  const int m = std::max(1, opt.grid);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) {
      const double a = m == 1 ? 0.0 : -opt.radius + 2 * opt.radius * i / (m - 1);
      const double b = m == 1 ? 0.0 : -opt.radius + 2 * opt.radius * k / (m - 1);
      const Vec z = state(a, b);
      const Vec hz = c.H(t0, z), lz = c.L(t0, z);
      lh = std::max(lh, dist(c.L(t0, hz), z));
      hl = std::max(hl, dist(c.H(t0, lz), z));
      const Vec ht = c.Htilde(t0, z), lt = c.Ltilde(t0, z);
      lt_ht = std::max(lt_ht, dist(c.Ltilde(t0, ht), z));
      ht_lt = std::max(ht_lt, dist(c.Htilde(t0, lt), z));
      disp_ht = std::max(disp_ht, dist(ht, z));
      disp_lt = std::max(disp_lt, dist(lt, z));
      const Vec to_lin = c.H(t0, ht);
      comp_a = std::max(comp_a, dist(c.toward_nonlinear(t0, to_lin), z));
      const Vec to_non = c.Ltilde(t0, lz);
      comp_b = std::max(comp_b, dist(c.toward_linear(t0, to_non), z));
      const Vec x = z.head(n1);
      const double dy = norm(Vec(hz.tail(n2) - z.tail(n2))), bound = c.h2_bound(x);
      h2_excess = std::max(h2_excess, dy - bound);
      if (bound > 0) h2_ratio = std::max(h2_ratio, dy / bound);
      if (norm(x) > 0) {
        const double T = c.crossing_T(t0, x).value;
        const double S = c.crossing_S(t0, hz.head(n1)).value;
        duality = std::max(duality, std::fabs(S - T));
      }
    }

  static const double kStates[][2] = {{1.0, 0.5}, {-0.5, 1.0}, {2.0, -0.3}, {-1.5, -1.0}, {0.3, 0.2},
                                      {2.5, 2.5}, {-2.5, 0.7}, {0.8, -2.2}};
  double dyn_comp_a = 0, dyn_comp_b = 0, dyn_h = 0, dyn_l = 0, dyn_ht = 0, dyn_lt = 0;
  const int ns = std::min<int>(opt.dynamics_states, 8);
  for (int q = 0; q < ns; ++q) {
    const double sc = opt.radius / 3.0;
    // y is scaled down by e^{-span} so the trajectory stays in the sampled ball; far outside it
    // the shifted forcing oscillates faster than the node grid resolves.
    const Vec z0 = state(sc * kStates[q][0], sc * kStates[q][1] * std::exp(-opt.t_span));
    const Vec c0 = c.toward_linear(t0, z0), n0 = c.toward_nonlinear(t0, z0);
    const Vec h0 = c.H(t0, z0), l0 = c.L(t0, z0), ht0 = c.Htilde(t0, z0), lt0 = c.Ltilde(t0, z0);
    for (int k = 1; k <= opt.dynamics_times; ++k) {
      const double t = t0 + opt.t_span * k / opt.dynamics_times;
      const Vec z3 = c.flow3(t, t0, z0), z8 = c.flow8(t, t0, z0), z5 = c.flow5(t, t0, z0);
      dyn_comp_a = std::max(dyn_comp_a, dist(c.toward_linear(t, z3), c.flow5(t, t0, c0)));
      dyn_comp_b = std::max(dyn_comp_b, dist(c.toward_nonlinear(t, z5), c.flow3(t, t0, n0)));
      dyn_h = std::max(dyn_h, dist(c.H(t, z8), c.flow5(t, t0, h0)));
      dyn_l = std::max(dyn_l, dist(c.L(t, z5), c.flow8(t, t0, l0)));
      dyn_ht = std::max(dyn_ht, dist(c.Htilde(t, z3), c.flow8(t, t0, ht0)));
      dyn_lt = std::max(dyn_lt, dist(c.Ltilde(t, z8), c.flow3(t, t0, lt0)));
    }
  }

  json probes_h = json::array(), probes_l = json::array();
  bool h_dec = true, l_dec = true;
  double prev_h = INFINITY, prev_l = INFINITY;
  for (int k = 1; k <= 6; ++k) {
    Vec x = Vec::Zero(n1);
    x(0) = std::pow(10.0, -k);
    const double vh = norm(c.H1(t0, x)), vl = norm(c.L1(t0, x));
    probes_h.push_back(vh);
    probes_l.push_back(vl);
    h_dec = h_dec && vh < prev_h;
    l_dec = l_dec && vl < prev_l;
    prev_h = vh;
    prev_l = vl;
  }

  const double sb = c.sigma_bar();
  json pass = {
      {"round_trip_stage", std::max({lh, hl, lt_ht, ht_lt}) <= opt.stage_tol},
      {"round_trip_composed", std::max(comp_a, comp_b) <= opt.composed_tol},
      {"dynamics", std::max({dyn_comp_a, dyn_comp_b, dyn_h, dyn_l, dyn_ht, dyn_lt}) <= opt.composed_tol},
      {"continuity", h_dec && l_dec},
      {"displacement", disp_ht <= sb && disp_lt <= sb && h2_excess <= 0},
  };
  bool all = true;
  for (auto& [k, v] : pass.items()) all = all && v.get<bool>();
  return {
      {"round_trip",
       {{"L_after_H", lh}, {"H_after_L", hl}, {"Ltilde_after_Htilde", lt_ht}, {"Htilde_after_Ltilde", ht_lt},
        {"composed_linear_then_back", comp_a}, {"composed_nonlinear_then_back", comp_b}}},
      {"dynamics",
       {{"composed_toward_linear", dyn_comp_a}, {"composed_toward_nonlinear", dyn_comp_b}, {"H", dyn_h},
        {"L", dyn_l}, {"Htilde", dyn_ht}, {"Ltilde", dyn_lt}}},
      {"continuity", {{"H1", probes_h}, {"L1", probes_l}, {"H1_decreasing", h_dec}, {"L1_decreasing", l_dec}}},
      {"displacement",
       {{"Htilde_max", disp_ht}, {"Ltilde_max", disp_lt}, {"sigma_bar", sb}, {"H2_worst_ratio", h2_ratio}}},
      {"crossing_duality_max", duality},
      {"tolerances", {{"stage", opt.stage_tol}, {"composed", opt.composed_tol}}},
      {"pass", pass},
      {"all_pass", all},
  };
}

}  // namespace depcag
