#include "depcag/transition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "depcag/quadrature.hpp"

namespace depcag {
namespace {

constexpr double kSingular = 1e-12;

struct Aug {
  Mat X, Y, J;
};

// Classical RK4 on X' = M X, Y' = -Y M, J' = Y M0 over [t0, t1] in n steps.
void rk4_leg(const LinearDepcag& sys, double t0, double t1, int n, Aug& s) {
  const double h = (t1 - t0) / n;
  for (int k = 0; k < n; ++k) {
    const double t = t0 + k * h;
    const double tm = t + 0.5 * h;
    const double te = (k + 1 == n) ? t1 : t + h;
    const Mat Ma = sys.M(t), Mb = sys.M(tm), Mc = sys.M(te);
    const Mat Na = sys.M0(t), Nb = sys.M0(tm), Nc = sys.M0(te);
    Mat k1x = Ma * s.X, k1y = -s.Y * Ma, k1j = s.Y * Na;
    Mat x2 = s.X + 0.5 * h * k1x, y2 = s.Y + 0.5 * h * k1y;
    Mat k2x = Mb * x2, k2y = -y2 * Mb, k2j = y2 * Nb;
    Mat x3 = s.X + 0.5 * h * k2x, y3 = s.Y + 0.5 * h * k2y;
    Mat k3x = Mb * x3, k3y = -y3 * Mb, k3j = y3 * Nb;
    Mat x4 = s.X + h * k3x, y4 = s.Y + h * k3y;
    Mat k4x = Mc * x4, k4y = -y4 * Mc, k4j = y4 * Nc;
    s.X += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    s.Y += (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    s.J += (h / 6.0) * (k1j + 2.0 * k2j + 2.0 * k3j + k4j);
  }
}

// X' = M X only.
void rk4_x(const LinearDepcag& sys, double t0, double t1, int n, Mat& X) {
  const double h = (t1 - t0) / n;
  for (int k = 0; k < n; ++k) {
    const double t = t0 + k * h;
    const double te = (k + 1 == n) ? t1 : t + h;
    const Mat Ma = sys.M(t), Mb = sys.M(t + 0.5 * h), Mc = sys.M(te);
    Mat k1 = Ma * X;
    Mat k2 = Mb * (X + 0.5 * h * k1);
    Mat k3 = Mb * (X + 0.5 * h * k2);
    Mat k4 = Mc * (X + h * k3);
    X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

int steps_for(double len, double h) { return std::max(1, static_cast<int>(std::ceil(std::fabs(len) / h - 1e-9))); }

Mat inverse_checked(const Eigen::PartialPivLU<Mat>& lu) { return lu.inverse(); }

}  // namespace

TransitionOperator::TransitionOperator(LinearDepcag sys, NumericsConfig num)
    : sys_(std::move(sys)), num_(num) {
  const TimeGrid& g = sys_.grid;
  const int N = g.intervals();
  e_left_.resize(N);
  e_right_.resize(N);
  fwd_.resize(N);
  bwd_.resize(N);
  lu_left_.resize(N);
  lu_right_.resize(N);
  for (int r = 0; r < N; ++r) {
    const double ts[2] = {g.knots[r], g.knots[r + 1]};
    auto p = propagate(g.anchors[r], ts);
    for (int side = 0; side < 2; ++side) {
      double d = p[side].J.determinant();
      if (!(std::fabs(d) >= kSingular))
        throw NumericError("singular interval factor: |det J| = " + std::to_string(std::fabs(d)) +
                           " at interval " + std::to_string(r));
    }
    e_left_[r] = p[0].E();
    e_right_[r] = p[1].E();
    if (!e_left_[r].allFinite() || !e_right_[r].allFinite())
      throw NumericError("non-finite interval factor at interval " + std::to_string(r));
    lu_left_[r].compute(e_left_[r]);
    lu_right_[r].compute(e_right_[r]);
    fwd_[r] = e_right_[r] * inverse_checked(lu_left_[r]);
    bwd_[r] = e_left_[r] * inverse_checked(lu_right_[r]);
  }
  has_origin_ = g.contains(0.0);
  if (has_origin_) {
    const int i0 = origin_interval_ = g.interval_of(0.0);
    zk0_.resize(N + 1);
    z0k_.resize(N + 1);
    const Mat E0 = e_anchor(0.0, i0);
    Eigen::PartialPivLU<Mat> lu0(E0);
    const Mat E0inv = lu0.inverse();
    zk0_[i0] = e_left_[i0] * E0inv;
    zk0_[i0 + 1] = e_right_[i0] * E0inv;
    z0k_[i0] = E0 * lu_left_[i0].inverse();
    z0k_[i0 + 1] = E0 * lu_right_[i0].inverse();
    for (int k = i0 + 2; k <= N; ++k) {
      zk0_[k] = fwd_[k - 1] * zk0_[k - 1];
      z0k_[k] = z0k_[k - 1] * bwd_[k - 1];
    }
    for (int k = i0 - 1; k >= 0; --k) {
      zk0_[k] = bwd_[k] * zk0_[k + 1];
      z0k_[k] = z0k_[k + 1] * fwd_[k];
    }
  }
}

double TransitionOperator::substep(int interval) const {
  return std::min(num_.ode_step, sys_.grid.length(interval) / 8.0);
}

std::vector<TransitionOperator::Propagated> TransitionOperator::propagate(
    double base, std::span<const double> times) const {
  const int n = sys_.dim;
  const TimeGrid& g = sys_.grid;
  std::vector<Propagated> out(times.size());
  if (times.empty()) return out;
  double lo = base, hi = base;
  for (double t : times) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const int r = g.interval_of(0.5 * (lo + hi));
  const double h = substep(r);

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });
  auto start = [&] { return Aug{Mat::Identity(n, n), Mat::Identity(n, n), Mat::Identity(n, n)}; };

  // forward branch
  Aug s = start();
  double cur = base;
  for (std::size_t idx : order) {
    double t = times[idx];
    if (t < base) continue;
    if (t > cur) {
      rk4_leg(sys_, cur, t, steps_for(t - cur, h), s);
      cur = t;
    }
    out[idx] = {s.X, s.Y, s.J};
  }
  // backward branch
  s = start();
  cur = base;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    double t = times[*it];
    if (t >= base) continue;
    if (t < cur) {
      rk4_leg(sys_, cur, t, steps_for(cur - t, h), s);
      cur = t;
    }
    out[*it] = {s.X, s.Y, s.J};
  }
  for (const auto& p : out)
    if (!p.X.allFinite() || !p.Y.allFinite() || !p.J.allFinite())
      throw NumericError("non-finite matrix entry during integration");
  return out;
}

Mat TransitionOperator::fundamental(double t, double s) const {
  const TimeGrid& g = sys_.grid;
  if (!g.contains(t) || !g.contains(s)) throw DomainError("fundamental: time outside window");
  Mat X = Mat::Identity(sys_.dim, sys_.dim);
  if (t == s) return X;
  double cur = s;
  if (t > s) {
    while (cur < t) {
      int r = g.interval_of(cur);
      double end = std::min(t, g.knots[r + 1]);
      rk4_x(sys_, cur, end, steps_for(end - cur, substep(r)), X);
      cur = end;
    }
  } else {
    while (cur > t) {
      int r = g.interval_of_left(cur);
      double end = std::max(t, g.knots[r]);
      rk4_x(sys_, cur, end, steps_for(cur - end, substep(r)), X);
      cur = end;
    }
  }
  if (!X.allFinite()) throw NumericError("non-finite matrix entry during integration");
  return X;
}

Mat TransitionOperator::j_matrix(double t, double tau) const {
  const TimeGrid& g = sys_.grid;
  if (!g.contains(t) || !g.contains(tau)) throw DomainError("j_matrix: time outside window");
  int r = g.interval_of(std::min(t, tau));
  if (std::max(t, tau) > g.knots[r + 1])
    throw DomainError("j_matrix: t and tau must lie in one closed interval");
  const double ts[1] = {t};
  Mat J = propagate(tau, ts)[0].J;
  if (!(std::fabs(J.determinant()) >= kSingular))
    throw NumericError("J(t,tau) is singular: |det J| < 1e-12");
  return J;
}

Mat TransitionOperator::e_matrix(double t, double tau) const {
  const TimeGrid& g = sys_.grid;
  if (!g.contains(t) || !g.contains(tau)) throw DomainError("e_matrix: time outside window");
  int r = g.interval_of(std::min(t, tau));
  if (std::max(t, tau) > g.knots[r + 1])
    throw DomainError("e_matrix: t and tau must lie in one closed interval");
  const double ts[1] = {t};
  auto p = propagate(tau, ts)[0];
  if (!(std::fabs(p.J.determinant()) >= kSingular))
    throw NumericError("J(t,tau) is singular: |det J| < 1e-12");
  return p.E();
}

Mat TransitionOperator::e_anchor(double t, int r) const {
  const double ts[1] = {t};
  return propagate(sys_.grid.anchors[r], ts)[0].E();
}

Mat TransitionOperator::transition_z(double t, double s) const {
  const TimeGrid& g = sys_.grid;
  if (!g.contains(t) || !g.contains(s)) throw DomainError("transition_z: time outside window");
  const int n = sys_.dim;
  if (t == s) return Mat::Identity(n, n);
  const int j = g.interval_of(t), i = g.interval_of(s);
  const Mat Et = e_anchor(t, j);
  Eigen::PartialPivLU<Mat> lus(e_anchor(s, i));
  if (i == j) return Et * lus.inverse();
  if (j > i) {
    Mat prod = e_right_[i] * lus.inverse();
    for (int r = i + 1; r <= j - 1; ++r) prod = fwd_[r] * prod;
    return Et * lu_left_[j].inverse() * prod;
  }
  Mat prod = e_left_[i] * lus.inverse();
  for (int r = i - 1; r >= j + 1; --r) prod = bwd_[r] * prod;
  return Et * lu_right_[j].inverse() * prod;
}

void TransitionOperator::require_origin() const {
  if (!has_origin_) throw DomainError("the working window must contain 0 for dichotomy kernels");
}

const Mat& TransitionOperator::z_knot_to_origin(int k) const {
  require_origin();
  return zk0_.at(k);
}

const Mat& TransitionOperator::z_origin_to_knot(int k) const {
  require_origin();
  return z0k_.at(k);
}

Mat TransitionOperator::z_to_origin(double t) const {
  require_origin();
  const int j = sys_.grid.interval_of(t), i0 = origin_interval_;
  const Mat Et = e_anchor(t, j);
  if (j == i0) return Et * Eigen::PartialPivLU<Mat>(e_anchor(0.0, i0)).inverse();
  if (j > i0) return Et * lu_left_[j].inverse() * zk0_[j];
  return Et * lu_right_[j].inverse() * zk0_[j + 1];
}

Mat TransitionOperator::z_from_origin(double s) const {
  require_origin();
  const int i = sys_.grid.interval_of(s), i0 = origin_interval_;
  const Mat Esinv = Eigen::PartialPivLU<Mat>(e_anchor(s, i)).inverse();
  if (i == i0) return e_anchor(0.0, i0) * Esinv;
  if (i > i0) return z0k_[i] * e_left_[i] * Esinv;
  return z0k_[i + 1] * e_right_[i] * Esinv;
}

Mat TransitionOperator::z_split(double t, double s, const Mat& P) const {
  const int n = sys_.dim;
  if (t >= s) return z_to_origin(t) * P * z_from_origin(s);
  return -z_to_origin(t) * (Mat::Identity(n, n) - P) * z_from_origin(s);
}

Mat TransitionOperator::green(double t, double s, const Mat& P) const {
  const TimeGrid& g = sys_.grid;
  const int n = sys_.dim;
  if (!g.contains(t) || !g.contains(s)) throw DomainError("green: time outside window");
  require_origin();
  const int j = g.interval_of(t), r = g.interval_of(s);
  const int ref = s < g.anchors[r] ? r : r + 1;
  const double tref = g.knots[ref];
  const Mat Zt0 = z_to_origin(t);
  Mat G = ref <= j ? Mat(Zt0 * P * z0k_[ref])
                   : Mat(-Zt0 * (Mat::Identity(n, n) - P) * z0k_[ref]);
  G = G * fundamental(tref, s);
  if (r == j) {
    const double z = g.anchors[j];
    if (t >= z && s >= z && s <= t) G += fundamental(t, s);
    if (t < z && s >= t && s < z) G -= fundamental(t, s);
  }
  return G;
}

namespace {

struct Piece {
  double a, b;  // oriented: integral from a to b
  double ref;   // kernel Z(t,ref) Phi(ref,s), or Phi(t,s) when ref == t and local
  bool local;
};

std::vector<Piece> block_pieces(const TimeGrid& g, double t, double tau) {
  const int i = g.interval_of(tau), j = g.interval_of(t);
  std::vector<Piece> ps;
  ps.push_back({tau, g.anchors[i], tau, false});
  if (t >= tau) {
    for (int r = i + 1; r <= j; ++r) ps.push_back({g.knots[r], g.anchors[r], g.knots[r], false});
    for (int r = i; r <= j - 1; ++r)
      ps.push_back({g.anchors[r], g.knots[r + 1], g.knots[r + 1], false});
  } else {
    for (int r = j + 1; r <= i; ++r) ps.push_back({g.anchors[r], g.knots[r], g.knots[r], false});
    for (int r = j; r <= i - 1; ++r)
      ps.push_back({g.knots[r + 1], g.anchors[r], g.knots[r + 1], false});
  }
  ps.push_back({g.anchors[j], t, t, true});
  return ps;
}

}  // namespace

Mat TransitionOperator::green_block(double t, double s, double tau) const {
  const TimeGrid& g = sys_.grid;
  if (!g.contains(t) || !g.contains(s) || !g.contains(tau))
    throw DomainError("green_block: time outside window");
  const int n = sys_.dim;
  Mat G = Mat::Zero(n, n);
  for (const Piece& p : block_pieces(g, t, tau)) {
    if (p.a == p.b) continue;
    const double lo = std::min(p.a, p.b), hi = std::max(p.a, p.b);
    const bool inside = (s >= lo && s < hi) || (s == hi && hi == t);
    if (!inside) continue;
    const double sign = p.b > p.a ? 1.0 : -1.0;
    if (p.local) G += sign * fundamental(t, s);
    else G += sign * transition_z(t, p.ref) * fundamental(p.ref, s);
  }
  return G;
}

Vec TransitionOperator::variation_of_constants(double t, double tau, const Vec& xi,
                                               const std::function<Vec(double)>& h) const {
  Vec out = transition_z(t, tau) * xi;
  for (const Piece& p : block_pieces(sys_.grid, t, tau)) {
    if (p.a == p.b) continue;
    const double len = p.b - p.a;
    std::size_t m = 2 * static_cast<std::size_t>(std::ceil(std::fabs(len) / (2.0 * num_.ode_step)));
    m = std::max<std::size_t>(m, 2);
    std::vector<double> ts(m + 1);
    for (std::size_t k = 0; k <= m; ++k) ts[k] = k == m ? p.b : p.a + len * k / m;
    auto prop = propagate(p.ref, ts);
    std::vector<Vec> f(m + 1);
    for (std::size_t k = 0; k <= m; ++k) f[k] = prop[k].Y * h(ts[k]);
    Vec piece = quad::composite(f.data(), m, len / m);
    out += p.local ? piece : Vec(transition_z(t, p.ref) * piece);
  }
  return out;
}

}  // namespace depcag
