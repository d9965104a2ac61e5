#include <omp.h>

#include "klab/kernels.hpp"

namespace klab::kernels::omp {

void bernstein(int n, std::span<const double> x, ConstRows f, MutRows out) {
  const auto count = static_cast<std::ptrdiff_t>(x.size());
  const auto ratios = detail::binomial_ratios(n);
#pragma omp parallel
  {
    std::vector<double> scratch;
    scratch.reserve(static_cast<std::size_t>(n) + 1);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i)
      detail::bernstein_node(n, x[i], ratios, f, out, static_cast<std::size_t>(i), scratch);
  }
}

void fejer(std::span<const double> kernel, ConstRows f, MutRows out) {
  const auto m = static_cast<std::ptrdiff_t>(kernel.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < m; ++j)
    detail::fejer_node(kernel, f, out, static_cast<std::size_t>(j));
}

}  // namespace klab::kernels::omp
