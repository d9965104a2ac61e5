#pragma once

#include <algorithm>
#include <cmath>

namespace klab {

/// Mixed absolute/relative tolerance: |x - y| <= atol + rtol * max(|x|, |y|).
struct Tolerance {
  double atol = 1e-10;
  double rtol = 1e-10;
};

inline bool approx_equal(double x, double y, Tolerance tol = {}) {
  return std::abs(x - y) <= tol.atol + tol.rtol * std::max(std::abs(x), std::abs(y));
}

}  // namespace klab
