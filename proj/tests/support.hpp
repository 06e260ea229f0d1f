#pragma once

#include <string>

#include "depcag/model.hpp"

namespace depcag::testing {

inline std::string config_path(const std::string& name) { return std::string(DEPCAG_CONFIG_DIR) + "/" + name; }

inline Config config_from(const char* text) { return parse_config(nlohmann::json::parse(text)); }

// Linear system with constant coefficients on a uniform grid.
inline LinearDepcag constant_linear(const Mat& M, const Mat& M0, double a, double b, double step, double frac) {
  LinearDepcag s;
  s.grid = TimeGrid::uniform(a, b, step, frac);
  s.dim = static_cast<int>(M.rows());
  s.M = [M](double) { return M; };
  s.M0 = [M0](double) { return M0; };
  return s;
}

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }

inline Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace depcag::testing
