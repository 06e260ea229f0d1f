#pragma once

#include <map>
#include <vector>

#include "depcag/linalg.hpp"

namespace depcag {

// Samples of a piecewise-smooth solution in increasing time order. A knot
// appears twice when the solution crosses it: first with the left-sided
// derivative, then with the right-sided one.
class Trajectory {
 public:
  std::vector<double> times;
  std::vector<Vec> values;
  std::vector<Vec> derivs;
  // Anchor value z(zeta_r) for every interval r the solver visited.
  std::map<int, Vec> anchor_values;
  // Fixed-point iteration count per visited interval.
  std::map<int, int> fp_iterations;

  bool empty() const { return times.empty(); }
  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  bool covers(double t) const { return !empty() && t >= t_begin() && t <= t_end(); }

  // Cubic Hermite interpolation; throws DomainError outside the samples.
  Vec at(double t) const;
  const Vec& anchor(int r) const;

  void push(double t, const Vec& v, const Vec& d);
  void reverse();
};

// Values on the nodes of a piecewise grid. Interpolation is cubic Lagrange
// inside the smooth piece that contains t, never across a break.
class SampledFunction {
 public:
  SampledFunction() = default;
  SampledFunction(std::vector<double> times, std::vector<Vec> values, std::vector<double> breaks);

  const std::vector<double>& times() const { return times_; }
  const std::vector<Vec>& values() const { return values_; }
  const std::vector<double>& breaks() const { return breaks_; }
  Vec at(double t) const;
  double sup_norm() const;

 private:
  std::vector<double> times_;
  std::vector<Vec> values_;
  std::vector<double> breaks_;
};

}  // namespace depcag
