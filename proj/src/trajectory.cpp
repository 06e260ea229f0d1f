#include "depcag/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depcag/error.hpp"

namespace depcag {

Vec Trajectory::at(double t) const {
  if (!covers(t))
    throw DomainError("trajectory queried at " + std::to_string(t) + " outside [" +
                      std::to_string(empty() ? 0.0 : t_begin()) + ", " +
                      std::to_string(empty() ? 0.0 : t_end()) + "]");
  if (times.size() == 1) return values[0];
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = static_cast<std::size_t>(it - times.begin());
  if (k == times.size()) return values.back();
  k -= 1;
  if (t == times[k]) return values[k];
  const double h = times[k + 1] - times[k];
  const double s = (t - times[k]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * values[k] + h10 * h * derivs[k] + h01 * values[k + 1] + h11 * h * derivs[k + 1];
}

const Vec& Trajectory::anchor(int r) const {
  auto it = anchor_values.find(r);
  if (it == anchor_values.end())
    throw DomainError("trajectory has no anchor value for interval " + std::to_string(r));
  return it->second;
}

void Trajectory::push(double t, const Vec& v, const Vec& d) {
  times.push_back(t);
  values.push_back(v);
  derivs.push_back(d);
}

void Trajectory::reverse() {
  std::reverse(times.begin(), times.end());
  std::reverse(values.begin(), values.end());
  std::reverse(derivs.begin(), derivs.end());
}

SampledFunction::SampledFunction(std::vector<double> times, std::vector<Vec> values,
                                 std::vector<double> breaks)
    : times_(std::move(times)), values_(std::move(values)), breaks_(std::move(breaks)) {
  std::sort(breaks_.begin(), breaks_.end());
  breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
}

Vec SampledFunction::at(double t) const {
  if (times_.empty() || t < times_.front() || t > times_.back())
    throw DomainError("sampled function queried outside its grid at " + std::to_string(t));
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  std::size_t k = static_cast<std::size_t>(it - times_.begin());
  if (k < times_.size() && times_[k] == t) return values_[k];
  // smooth piece [lo, hi] around t
  auto bh = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  double lo = bh == breaks_.begin() ? times_.front() : *(bh - 1);
  double hi = bh == breaks_.end() ? times_.back() : *bh;
  std::size_t a = static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), lo) - times_.begin());
  std::size_t b = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), hi) - times_.begin());
  // four nodes nearest to t inside [a, b)
  std::size_t first = k >= 2 ? k - 2 : 0;
  first = std::max(first, a);
  std::size_t last = std::min(first + 4, b);
  if (last - first < 4 && last == b) first = (b >= a + 4) ? b - 4 : a;
  Vec out = Vec::Zero(values_[0].size());
  for (std::size_t i = first; i < last; ++i) {
    double w = 1.0;
    for (std::size_t m = first; m < last; ++m)
      if (m != i) w *= (t - times_[m]) / (times_[i] - times_[m]);
    out += w * values_[i];
  }
  return out;
}

double SampledFunction::sup_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s = std::max(s, norm(v));
  return s;
}

}  // namespace depcag
