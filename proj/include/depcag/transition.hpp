#pragma once

#include <Eigen/LU>
#include <functional>
#include <span>
#include <vector>

#include "depcag/model.hpp"

namespace depcag {

// Solution operators of the linear system z' = M z + M0 z(gamma(t)).
// All interval factors are built eagerly, so every query is read-only and
// safe to call from concurrent threads.
class TransitionOperator {
 public:
  TransitionOperator(LinearDepcag sys, NumericsConfig num);

  const LinearDepcag& system() const { return sys_; }
  const TimeGrid& grid() const { return sys_.grid; }
  const NumericsConfig& numerics() const { return num_; }
  int dim() const { return sys_.dim; }

  // Phi(t,s) for X' = M X.
  Mat fundamental(double t, double s) const;
  // J(t,tau) = I + int_tau^t Phi(tau,s) M0(s) ds; t, tau in one closed interval.
  Mat j_matrix(double t, double tau) const;
  // E(t,tau) = Phi(t,tau) J(t,tau).
  Mat e_matrix(double t, double tau) const;
  Mat transition_z(double t, double s) const;
  // Z(t,0) P Z(0,s) for t >= s, -Z(t,0)(I-P)Z(0,s) otherwise.
  Mat z_split(double t, double s, const Mat& P) const;
  // Green kernel of the bounded-solution map; see docs/green.md.
  Mat green(double t, double s, const Mat& P) const;
  Mat green1(double t, double s, const Mat& P) const { return green(t, s, P); }
  Mat green2(double t, double s, const Mat& P) const { return -green(t, s, P); }

  // Signed kernel density of the variation-of-constants formula based at tau:
  // z(t) = Z(t,tau) xi + integral over s of green_block(t,s,tau) h(s).
  Mat green_block(double t, double s, double tau) const;
  // The same formula evaluated piece by piece with oriented quadrature.
  Vec variation_of_constants(double t, double tau, const Vec& xi,
                             const std::function<Vec(double)>& h) const;

  // Values along a sweep from `base`: X = Phi(t,base), Y = Phi(base,t), J = J(t,base).
  struct Propagated {
    Mat X, Y, J;
    Mat E() const { return X * J; }
  };
  // `times` must lie in the closure of one interval together with `base`.
  std::vector<Propagated> propagate(double base, std::span<const double> times) const;

  double substep(int interval) const;

  // Cached Z(t_k, 0) and Z(0, t_k); throws DomainError if 0 is outside the window.
  const Mat& z_knot_to_origin(int k) const;
  const Mat& z_origin_to_knot(int k) const;
  // Z(t,0) and Z(0,s) through the knot caches.
  Mat z_to_origin(double t) const;
  Mat z_from_origin(double s) const;

  // Factors of interval r: E(t_r, zeta_r) and E(t_{r+1}, zeta_r).
  const Mat& e_left(int r) const { return e_left_[r]; }
  const Mat& e_right(int r) const { return e_right_[r]; }
  // Z(t_{r+1}, t_r) and Z(t_r, t_{r+1}).
  const Mat& forward_factor(int r) const { return fwd_[r]; }
  const Mat& backward_factor(int r) const { return bwd_[r]; }

 private:
  LinearDepcag sys_;
  NumericsConfig num_;
  std::vector<Mat> e_left_, e_right_, fwd_, bwd_;
  std::vector<Eigen::PartialPivLU<Mat>> lu_left_, lu_right_;
  std::vector<Mat> zk0_, z0k_;
  bool has_origin_ = false;
  int origin_interval_ = 0;

  Mat e_anchor(double t, int r) const;  // E(t, zeta_r) for t in closure of I_r
  void require_origin() const;
};

}  // namespace depcag
