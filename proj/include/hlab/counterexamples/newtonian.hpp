#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hlab/core/error.hpp"

namespace hlab::cx {

/// |x − z|^{2−n}, a multiple of the Newtonian potential in ℝⁿ.
inline double newtonian_green(int n, std::span<const double> x, std::span<const double> z) {
  if (n < 3) throw DomainError("newtonian_green: n must be >= 3");
  if (x.size() != static_cast<std::size_t>(n) || z.size() != static_cast<std::size_t>(n))
    throw DomainError("newtonian_green: points must lie in R^n");
  double r2 = 0.0;
  for (int i = 0; i < n; ++i) r2 += (x[i] - z[i]) * (x[i] - z[i]);
  if (r2 == 0.0) throw PoleError("newtonian_green: x equals the pole");
  return std::pow(r2, 0.5 * (2.0 - n));
}

/// (2n+1)-point central-difference Laplacian of the Newtonian potential at x.
inline double newtonian_laplacian_fd(int n, std::span<const double> x, std::span<const double> z, double h) {
  std::vector<double> p(x.begin(), x.end());
  const double c = newtonian_green(n, x, z);
  double lap = 0.0;
  for (int i = 0; i < n; ++i) {
    const double xi = p[i];
    p[i] = xi + h;
    const double fp = newtonian_green(n, p, z);
    p[i] = xi - h;
    const double fm = newtonian_green(n, p, z);
    p[i] = xi;
    lap += (fp - 2.0 * c + fm) / (h * h);
  }
  return lap;
}

/// h_n(z_n)/h_n(x_n) for the Brownian construction, equal to (3/4)^{2−n}.
inline double bm_harnack_ratio(int n) {
  if (n < 3) throw DomainError("bm_harnack_ratio: n must be >= 3");
  return std::pow(0.75, 2.0 - n);
}

}  // namespace hlab::cx
