#pragma once

#include <cstddef>
#include <vector>

namespace depcag::quad {

// Composite rule on m equal steps of width h over values f[0..m].
// Even m: Simpson. Odd m >= 3: Simpson plus a trailing 3/8 panel.
// m == 1: trapezoid.
template <class T>
T composite(const T* f, std::size_t m, double h) {
  if (m == 0) return f[0] * 0.0;
  if (m == 1) return (f[0] + f[1]) * (0.5 * h);
  std::size_t simpson = (m % 2 == 0) ? m : m - 3;
  T acc = f[0] * 0.0;
  for (std::size_t i = 0; i + 2 <= simpson; i += 2) acc += (f[i] + 4.0 * f[i + 1] + f[i + 2]) * (h / 3.0);
  if (simpson != m) {
    std::size_t i = simpson;
    acc += (f[i] + 3.0 * f[i + 1] + 3.0 * f[i + 2] + f[i + 3]) * (3.0 * h / 8.0);
  }
  return acc;
}

// Running integrals out[k] = int_{x0}^{xk} f, k = 0..m, fourth order at even
// nodes and third order at odd ones. Requires m >= 2 except for trivial cases.
template <class T>
void cumulative(const T* f, std::size_t m, double h, T* out) {
  out[0] = f[0] * 0.0;
  if (m == 0) return;
  if (m == 1) {
    out[1] = (f[0] + f[1]) * (0.5 * h);
    return;
  }
  for (std::size_t k = 1; k <= m; ++k) {
    if (k % 2 == 0) {
      out[k] = out[k - 2] + (f[k - 2] + 4.0 * f[k - 1] + f[k]) * (h / 3.0);
    } else if (k + 1 <= m) {
      out[k] = out[k - 1] + (5.0 * f[k - 1] + 8.0 * f[k] - f[k + 1]) * (h / 12.0);
    } else {
      out[k] = out[k - 1] + (-f[k - 2] + 8.0 * f[k - 1] + 5.0 * f[k]) * (h / 12.0);
    }
  }
}

}  // namespace depcag::quad
