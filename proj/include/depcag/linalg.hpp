#pragma once

#include <Eigen/Dense>
#include <functional>

namespace depcag {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using MatrixFn = std::function<Mat(double)>;

// Vector norm: max-abs. Matrix norm: the induced operator norm (max row sum).
inline double norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
inline double norm(const Mat& m) {
  return m.size() ? m.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

inline Mat block_diag(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace depcag
