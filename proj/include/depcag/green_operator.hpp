#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "depcag/transition.hpp"
#include "depcag/trajectory.hpp"
#include "depcag/verify.hpp"

namespace depcag {

// Forcing term sampled by the sweep: value at time s inside interval r.
// The interval is passed because the forcing may jump at knots.
using Source = std::function<Vec(double s, int node, int interval)>;

// Precomputed quadrature of  (T h)(t) = int G~(t,s) h(s) ds  on a piece grid:
// every interval is split at its anchor into [t_r, zeta_r] and [zeta_r, t_{r+1}],
// each piece carries an even number of equal steps no longer than node_step.
// See docs/green.md for the derivation of the sweep.
class GreenSweep {
 public:
  GreenSweep(std::shared_ptr<const TransitionOperator> op, Mat P, double node_step);

  const std::vector<double>& nodes() const { return nodes_; }
  // Interval used for output at each node (knots go to the interval they start).
  const std::vector<int>& node_interval() const { return node_interval_; }
  // Node index of zeta_r and of t_k.
  int anchor_node(int r) const { return anchor_node_[r]; }
  int knot_node(int k) const { return knot_node_[k]; }
  // Break points for interpolation: knots and anchors.
  std::vector<double> breaks() const;
  const TransitionOperator& op() const { return *op_; }
  const Mat& projection() const { return P_; }
  double node_step() const { return step_; }

  // (T h) at every node. fast = false runs the serial pointwise-kernel version.
  std::vector<Vec> apply(const Source& h, bool fast = true) const;
  // (T h)(t) at one arbitrary time, using pieces that meet [lo, hi]; h must
  // vanish outside [lo, hi].
  Vec value_at(double t, const Source& h, double lo, double hi) const;

 private:
  struct Piece {
    double a, b;  // a < b, or a == b for an empty piece
    int interval;
    int ref;      // knot index of the reference time
    int first;    // global index of node 0
    int m;        // steps
    int flat;     // offset into the per-piece sample arrays
  };
  std::shared_ptr<const TransitionOperator> op_;
  Mat P_;
  double step_;
  int n_;
  std::vector<Piece> pieces_;
  std::vector<double> nodes_;
  std::vector<int> node_interval_, anchor_node_, knot_node_;
  std::vector<std::pair<int, int>> owner_;  // (piece, local index) producing each node's output
  // Per piece sample: Phi(t_ref, s), Phi(zeta, s), Phi(s, zeta), Z(s, 0).
  std::vector<Mat> yref_, yanc_, xanc_, zs0_;
  std::vector<Mat> z0k_;  // Z(0, t_q)

  double s_at(const Piece& p, int k) const { return k == p.m ? p.b : p.a + (p.b - p.a) * k / p.m; }
  std::vector<Vec> apply_fast(const Source& h) const;
  std::vector<Vec> apply_reference(const Source& h) const;
};

// Nonlinearity h(t, z, w) with w = z(gamma(t)); r is the interval whose
// anchor w belongs to, which differs from interval_of(t) at a right end knot.
using Forcing = std::function<Vec(double t, int r, const Vec& z, const Vec& w)>;

struct BoundedSolution {
  SampledFunction phi0;
  double sigma = 0;
  double residual = 0;       // sup |T phi0 - phi0| on the node grid
  double residual_half = -1; // same with half the node step; -1 when not computed
  int iterations = 0;
  double horizon = 0;
  double trusted_lo = 0, trusted_hi = 0;
  Vec at(double t) const { return phi0.at(t); }
};

struct PicardOptions {
  std::optional<Vec> constant_start;  // default: zero function
  std::optional<std::pair<double, double>> support;  // h treated as zero outside
  bool fast = true;
  bool half_step_check = false;
};

// Unique bounded solution of z' = M z + M0 z(gamma) + h(t, z, z(gamma)) by
// Picard iteration of T. The constructor checks the bound inequalities for
// (r, mu, l) and throws HypothesisError naming the first failure.
class BoundedSolver {
 public:
  BoundedSolver(const LinearDepcag& lin, const DichotomySpec& d, const NumericsConfig& num, double r,
                double mu, double l);

  BoundedSolution solve(const Forcing& h, const PicardOptions& opt = {}) const;

  const GreenSweep& sweep() const { return *sweep_; }
  const TransitionOperator& op() const { return *op_; }
  const HypothesisReport& report() const { return report_; }
  const GrowthConstants& growth() const { return gc_; }
  double sigma() const { return sigma_; }
  // Truncation horizon: K rho~ (2 r sigma + mu) e^{-alpha T} / alpha <= tail_tol.
  double horizon() const { return horizon_; }
  static double node_step_for(const TimeGrid& g, const NumericsConfig& num);

 private:
  DichotomySpec d_;
  NumericsConfig num_;
  double r_, mu_, l_;
  std::shared_ptr<const TransitionOperator> op_;
  std::unique_ptr<GreenSweep> sweep_;
  GrowthConstants gc_;
  HypothesisReport report_;
  double sigma_ = 0, horizon_ = 0;

  std::vector<Vec> picard_step(const GreenSweep& sw, const Forcing& h, const std::vector<Vec>& phi,
                               const std::pair<double, double>& supp, bool fast) const;
};

// Convenience for a DepcagSystem; an absent h is the zero forcing.
BoundedSolution bounded_solution(const DepcagSystem& s, const DichotomySpec& d, const NumericsConfig& num,
                                 const PicardOptions& opt = {});

}  // namespace depcag
