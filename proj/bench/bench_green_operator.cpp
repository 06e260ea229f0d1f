// Times the OpenMP sweep against the serial pointwise-kernel reference.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <memory>

#include "depcag/green_operator.hpp"
#include "depcag/model.hpp"

using namespace depcag;

int main(int argc, char** argv) {
  const double half = argc > 1 ? std::atof(argv[1]) : 4.0;
  LinearDepcag lin;
  lin.grid = TimeGrid::uniform(-half, half, 0.25, 0.5);
  lin.dim = 2;
  lin.M = [](double t) {
    Mat m(2, 2);
    m << -1.0, 0.3 * std::sin(t), 0.0, 1.0;
    return m;
  };
  lin.M0 = [](double) {
    Mat m(2, 2);
    m << -0.05, 0.0, 0.02, 0.05;
    return m;
  };
  NumericsConfig num;
  auto op = std::make_shared<const TransitionOperator>(lin, num);
  Mat P = Mat::Zero(2, 2);
  P(0, 0) = 1.0;
  GreenSweep sweep(op, P, 0.02);
  Source h = [](double s, int, int) {
    Vec v(2);
    v << std::cos(s), 0.5 * std::sin(2 * s);
    return v;
  };

  auto time = [&](bool fast, std::vector<Vec>& out) {
    auto t0 = std::chrono::steady_clock::now();
    out = sweep.apply(h, fast);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  std::vector<Vec> a, b;
  const double tf = time(true, a);
  const double tr = time(false, b);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, (a[i] - b[i]).lpNorm<Eigen::Infinity>());
  std::printf("nodes %zu  threads %d\n", sweep.nodes().size(), omp_get_max_threads());
  std::printf("fast      %10.4f s\n", tf);
  std::printf("reference %10.4f s\n", tr);
  std::printf("speedup   %10.2f\n", tr / tf);
  std::printf("max diff  %10.3e\n", diff);
  return 0;
}
