#include "depcag/green_operator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depcag/error.hpp"
#include "depcag/quadrature.hpp"

namespace depcag {

GreenSweep::GreenSweep(std::shared_ptr<const TransitionOperator> op, Mat P, double node_step)
    : op_(std::move(op)), P_(std::move(P)), step_(node_step), n_(op_->dim()) {
  const TimeGrid& g = op_->grid();
  const int N = g.intervals();
  if (P_.rows() != n_ || P_.cols() != n_) throw DomainError("green sweep: projection has the wrong size");
  anchor_node_.resize(N);
  knot_node_.resize(N + 1);
  nodes_.push_back(g.knots[0]);
  knot_node_[0] = 0;
  int flat = 0;
  auto add_piece = [&](double a, double b, int r, int ref) {
    const double len = b - a;
    int m = 0;
    if (len > 0) m = std::max(4, 2 * static_cast<int>(std::ceil(len / (2.0 * step_) - 1e-9)));
    Piece p{a, b, r, ref, static_cast<int>(nodes_.size()) - 1, m, flat};
    for (int k = 1; k <= m; ++k) nodes_.push_back(s_at(p, k));
    flat += m + 1;
    pieces_.push_back(p);
  };
  for (int r = 0; r < N; ++r) {
    add_piece(g.knots[r], g.anchors[r], r, r);
    anchor_node_[r] = static_cast<int>(nodes_.size()) - 1;
    add_piece(g.anchors[r], g.knots[r + 1], r, r + 1);
    knot_node_[r + 1] = static_cast<int>(nodes_.size()) - 1;
  }
  owner_.assign(nodes_.size(), {0, 0});
  for (int p = 0; p < static_cast<int>(pieces_.size()); ++p)
    for (int k = 0; k <= pieces_[p].m; ++k) owner_[pieces_[p].first + k] = {p, k};
  node_interval_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) node_interval_[i] = pieces_[owner_[i].first].interval;

  yref_.resize(flat);
  yanc_.resize(flat);
  xanc_.resize(flat);
  zs0_.resize(flat);
  z0k_.resize(N + 1);
  for (int q = 0; q <= N; ++q) z0k_[q] = op_->z_origin_to_knot(q);

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < N; ++r) {
    const Piece& L = pieces_[2 * r];
    const Piece& R = pieces_[2 * r + 1];
    std::vector<double> ts;
    for (int k = 0; k <= L.m; ++k) ts.push_back(s_at(L, k));
    for (int k = 0; k <= R.m; ++k) ts.push_back(s_at(R, k));
    const auto pr = op_->propagate(g.anchors[r], ts);
    const Mat Q = op_->z_to_origin(g.anchors[r]);
    const Mat x_left = pr[0].X;          // Phi(t_r, zeta_r)
    const Mat x_right = pr.back().X;     // Phi(t_{r+1}, zeta_r)
    std::size_t idx = 0;
    for (const Piece* p : {&L, &R}) {
      const Mat& xref = p == &L ? x_left : x_right;
      for (int k = 0; k <= p->m; ++k, ++idx) {
        const auto& s = pr[idx];
        yref_[p->flat + k] = xref * s.Y;
        yanc_[p->flat + k] = s.Y;
        xanc_[p->flat + k] = s.X;
        zs0_[p->flat + k] = s.E() * Q;
      }
    }
  }
}

std::vector<double> GreenSweep::breaks() const {
  const TimeGrid& g = op_->grid();
  std::vector<double> b = g.knots;
  b.insert(b.end(), g.anchors.begin(), g.anchors.end());
  return b;
}

std::vector<Vec> GreenSweep::apply(const Source& h, bool fast) const {
  return fast ? apply_fast(h) : apply_reference(h);
}

std::vector<Vec> GreenSweep::apply_fast(const Source& h) const {
  const int np = static_cast<int>(pieces_.size());
  const int N = op_->grid().intervals();
  std::vector<Vec> hv(yref_.size());
  std::vector<Vec> a(np, Vec::Zero(n_));
  std::vector<Vec> cum(yref_.size());

#pragma omp parallel
  {
    std::vector<Vec> f, c;
#pragma omp for schedule(static)
    for (int pi = 0; pi < np; ++pi) {
      const Piece& p = pieces_[pi];
      for (int k = 0; k <= p.m; ++k) hv[p.flat + k] = h(s_at(p, k), p.first + k, p.interval);
      if (p.m == 0) {
        cum[p.flat] = Vec::Zero(n_);
        continue;
      }
      const double dh = (p.b - p.a) / p.m;
      f.resize(p.m + 1);
      c.resize(p.m + 1);
      for (int k = 0; k <= p.m; ++k) f[k] = yref_[p.flat + k] * hv[p.flat + k];
      a[pi] = quad::composite(f.data(), p.m, dh);
      // local integral measured from the anchor
      for (int k = 0; k <= p.m; ++k) f[k] = yanc_[p.flat + k] * hv[p.flat + k];
      const bool left = pi % 2 == 0;
      if (left) {
        std::reverse(f.begin(), f.end());
        quad::cumulative(f.data(), p.m, -dh, c.data());
        for (int k = 0; k <= p.m; ++k) cum[p.flat + k] = c[p.m - k];
      } else {
        quad::cumulative(f.data(), p.m, dh, c.data());
        for (int k = 0; k <= p.m; ++k) cum[p.flat + k] = c[k];
      }
    }
  }

  std::vector<Vec> W(N + 1, Vec::Zero(n_));
  for (int pi = 0; pi < np; ++pi) W[pieces_[pi].ref] += a[pi];
  for (int q = 0; q <= N; ++q) W[q] = z0k_[q] * W[q];
  std::vector<Vec> pv(N);
  Vec past = Vec::Zero(n_), total = Vec::Zero(n_);
  for (int q = 0; q <= N; ++q) total += W[q];
  const Mat IP = Mat::Identity(n_, n_) - P_;
  for (int j = 0; j < N; ++j) {
    past += W[j];
    pv[j] = P_ * past - IP * Vec(total - past);
  }

  std::vector<Vec> out(nodes_.size());
  const int nn = static_cast<int>(nodes_.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nn; ++i) {
    const auto [pi, k] = owner_[i];
    const Piece& p = pieces_[pi];
    out[i] = zs0_[p.flat + k] * pv[p.interval] + xanc_[p.flat + k] * cum[p.flat + k];
  }
  return out;
}

std::vector<Vec> GreenSweep::apply_reference(const Source& h) const {
  const TransitionOperator& op = *op_;
  const TimeGrid& g = op.grid();
  const Mat IP = Mat::Identity(n_, n_) - P_;
  std::vector<Vec> hv(yref_.size());
  for (const Piece& p : pieces_)
    for (int k = 0; k <= p.m; ++k) hv[p.flat + k] = h(s_at(p, k), p.first + k, p.interval);

  std::vector<Vec> out(nodes_.size());
  std::vector<Vec> fl, fr, cl, cr;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double t = nodes_[i];
    const int j = node_interval_[i];
    const Mat Zt0 = op.z_to_origin(t);
    Vec acc = Vec::Zero(n_);
    for (std::size_t pi = 0; pi < pieces_.size(); ++pi) {
      const Piece& p = pieces_[pi];
      if (p.m == 0) continue;
      const double tref = g.knots[p.ref];
      const Mat Zp = p.ref <= j ? Mat(Zt0 * P_ * z0k_[p.ref]) : Mat(-Zt0 * IP * z0k_[p.ref]);
      const bool left_piece = pi % 2 == 0;
      const bool local = p.interval == j && (left_piece ? t < g.anchors[j] : t >= g.anchors[j]);
      fl.resize(p.m + 1);
      fr.resize(p.m + 1);
      int kt = -1;
      for (int k = 0; k <= p.m; ++k) {
        const double s = s_at(p, k);
        if (s == t) kt = k;
        const Vec base = Zp * (op.fundamental(tref, s) * hv[p.flat + k]);
        fl[k] = base;
        fr[k] = base;
        if (local) {
          const Vec loc = op.fundamental(t, s) * hv[p.flat + k];
          // continuation of the kernel from below t and from above t
          if (left_piece) fr[k] -= loc;
          else fl[k] += loc;
        }
      }
      const double dh = (p.b - p.a) / p.m;
      if (kt >= 0) {
        cl.resize(p.m + 1);
        cr.resize(p.m + 1);
        quad::cumulative(fl.data(), p.m, dh, cl.data());
        quad::cumulative(fr.data(), p.m, dh, cr.data());
        acc += cl[kt] + quad::composite(fr.data(), p.m, dh) - cr[kt];
      } else if (t >= p.b) {
        acc += quad::composite(fl.data(), p.m, dh);
      } else {
        acc += quad::composite(fr.data(), p.m, dh);
      }
    }
    out[i] = acc;
  }
  return out;
}

Vec GreenSweep::value_at(double t, const Source& h, double lo, double hi) const {
  const TransitionOperator& op = *op_;
  const TimeGrid& g = op.grid();
  if (!g.contains(t)) throw DomainError("green sweep: time outside window");
  const int j = g.interval_of(t);
  auto hs = [&](double s, int node, int r) -> Vec {
    if (s < lo || s > hi) return Vec::Zero(n_);
    return h(s, node, r);
  };
  Vec past = Vec::Zero(n_), fut = Vec::Zero(n_);
  std::vector<Vec> f;
  for (const Piece& p : pieces_) {
    if (p.m == 0 || p.b <= lo || p.a >= hi) continue;
    f.resize(p.m + 1);
    for (int k = 0; k <= p.m; ++k) f[k] = yref_[p.flat + k] * hs(s_at(p, k), p.first + k, p.interval);
    const Vec w = z0k_[p.ref] * quad::composite(f.data(), p.m, (p.b - p.a) / p.m);
    if (p.ref <= j) past += w;
    else fut += w;
  }
  Vec out = op.z_to_origin(t) * (P_ * past - (Mat::Identity(n_, n_) - P_) * fut);
  const double z = g.anchors[j];
  if (t != z) {
    const int m = std::max(2, 2 * static_cast<int>(std::ceil(std::fabs(t - z) / (2.0 * step_))));
    std::vector<double> ts(m + 1);
    for (int k = 0; k <= m; ++k) ts[k] = k == m ? t : z + (t - z) * k / m;
    const auto pr = op.propagate(t, ts);
    f.resize(m + 1);
    for (int k = 0; k <= m; ++k) f[k] = pr[k].Y * hs(ts[k], -1, j);
    out += quad::composite(f.data(), m, (t - z) / m);
  }
  return out;
}

// ------------------------------------------------------------- Picard

double BoundedSolver::node_step_for(const TimeGrid& g, const NumericsConfig& num) {
  return std::min(4.0 * num.ode_step, g.theta / 16.0);
}

BoundedSolver::BoundedSolver(const LinearDepcag& lin, const DichotomySpec& d, const NumericsConfig& num,
                             double r, double mu, double l)
    : d_(d), num_(num), r_(r), mu_(mu), l_(l) {
  gc_ = growth_constants(lin, d.alpha, num.ode_step);
  report_ = check_theorem1(gc_, d, r, mu, l, lin.grid.theta);
  report_.entries.insert(report_.entries.begin(),
                         CheckEntry{"C", "nu+ < 1 and nu- < 1", std::max(gc_.nu_plus, gc_.nu_minus), 1.0,
                                    gc_.condition_c, ""});
  if (!report_.all_pass()) {
    const std::string name = report_.first_failure();
    throw HypothesisError(name, "bounded solution hypotheses fail: " + name + " (" +
                                    report_.find(name)->inequality + ")");
  }
  sigma_ = report_.derived.at("sigma");
  const double v = d.K * gc_.rho_tilde * (2 * r * sigma_ + mu) / (d.alpha * num.tail_tol);
  horizon_ = v > 1 ? std::log(v) / d.alpha : 0.0;
  op_ = std::make_shared<TransitionOperator>(lin, num);
  sweep_ = std::make_unique<GreenSweep>(op_, d.P, node_step_for(lin.grid, num));
}

std::vector<Vec> BoundedSolver::picard_step(const GreenSweep& sw, const Forcing& h, const std::vector<Vec>& phi,
                                            const std::pair<double, double>& supp, bool fast) const {
  const int n = op_->dim();
  Source src = [&](double s, int node, int r) -> Vec {
    if (s < supp.first || s > supp.second) return Vec::Zero(n);
    return h(s, r, phi[node], phi[sw.anchor_node(r)]);
  };
  return sw.apply(src, fast);
}

BoundedSolution BoundedSolver::solve(const Forcing& h, const PicardOptions& opt) const {
  const TimeGrid& g = op_->grid();
  const int n = op_->dim();
  const auto supp = opt.support.value_or(std::pair{g.t_min(), g.t_max()});
  BoundedSolution out;
  out.sigma = sigma_;
  out.horizon = horizon_;
  out.trusted_lo = supp.first + horizon_;
  out.trusted_hi = supp.second - horizon_;
  if (out.trusted_lo > out.trusted_hi)
    throw DomainError("truncation horizon " + std::to_string(horizon_) +
                      " exceeds the working window; widen the window or relax tail_tol");
  const GreenSweep& sw = *sweep_;
  const std::size_t nn = sw.nodes().size();
  std::vector<Vec> phi(nn, opt.constant_start.value_or(Vec::Zero(n)));
  for (auto& v : phi)
    if (v.size() != n) throw DomainError("Picard start has the wrong dimension");
  bool converged = false;
  double best = INFINITY;
  int stalled = 0;
  for (int it = 1; it <= num_.max_iters; ++it) {
    std::vector<Vec> next = picard_step(sw, h, phi, supp, opt.fast);
    double diff = 0;
    for (std::size_t k = 0; k < nn; ++k) diff = std::max(diff, norm(Vec(next[k] - phi[k])));
    phi = std::move(next);
    out.iterations = it;
    if (!std::isfinite(diff)) throw NumericError("Picard iteration produced non-finite values");
    if (diff <= num_.picard_tol) {
      converged = true;
      break;
    }
    // rounding noise in the forcing can stop the contraction above picard_tol
    if (diff < 0.5 * best) {
      best = diff;
      stalled = 0;
    } else if (++stalled >= 10) {
      throw NumericError("Picard iteration stalled at a step of " + std::to_string(diff) +
                         " above picard_tol; the forcing is not resolved to that accuracy");
    }
  }
  if (!converged)
    throw NumericError("Picard iteration did not reach picard_tol in " + std::to_string(num_.max_iters) +
                       " iterations");
  {
    const std::vector<Vec> tp = picard_step(sw, h, phi, supp, opt.fast);
    for (std::size_t k = 0; k < nn; ++k) out.residual = std::max(out.residual, norm(Vec(tp[k] - phi[k])));
  }
  out.phi0 = SampledFunction(sw.nodes(), phi, sw.breaks());
  if (opt.half_step_check) {
    GreenSweep fine(op_, d_.P, sw.node_step() / 2);
    const auto& p0 = out.phi0;
    Source src = [&](double s, int, int r) -> Vec {
      if (s < supp.first || s > supp.second) return Vec::Zero(n);
      return h(s, r, p0.at(s), p0.at(g.anchors[r]));
    };
    const std::vector<Vec> tp = fine.apply(src, opt.fast);
    out.residual_half = 0;
    for (std::size_t k = 0; k < tp.size(); ++k)
      out.residual_half = std::max(out.residual_half, norm(Vec(tp[k] - p0.at(fine.nodes()[k]))));
  }
  return out;
}

BoundedSolution bounded_solution(const DepcagSystem& s, const DichotomySpec& d, const NumericsConfig& num,
                                 const PicardOptions& opt) {
  double r = 0, mu = 0, l = 0;
  Forcing h;
  if (s.h) {
    r = s.h->growth_r;
    mu = s.h->offset_mu;
    l = s.h->lipschitz_l;
    NonlinearTerm term = *s.h;
    h = [term](double t, int, const Vec& z, const Vec& w) { return term(t, z, w); };
  } else {
    const int n = s.dim();
    h = [n](double, int, const Vec&, const Vec&) { return Vec::Zero(n); };
  }
  BoundedSolver solver(linear_part(s), d, num, r, mu, l);
  return solver.solve(h, opt);
}

}  // namespace depcag
