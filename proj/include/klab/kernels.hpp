#pragma once

// Inner loops of the positive operators. Every kernel exists twice: a serial
// reference in klab::kernels::serial and an OpenMP version in
// klab::kernels::omp with the same signature. Each output entry is produced by
// exactly one loop iteration in both, so the two agree bit for bit.

#include <cstddef>
#include <span>
#include <vector>

#include "klab/parallel.hpp"

namespace klab::kernels {

/// Row-major view of `rows` equally long rows.
template <typename T>
struct Rows {
  std::span<T> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<T> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

using ConstRows = Rows<const double>;
using MutRows = Rows<double>;

/// Relative cutoff below which Bernstein weights are dropped, measured against
/// the weight at the mode. The dropped mass is far below double resolution.
inline constexpr double bernstein_weight_cutoff = 1e-18;

/// Fejer kernel K_n(u) = (1/(n+1)) (sin((n+1)u/2) / sin(u/2))^2 at u = 2 pi d / m,
/// d = 0..m-1.
std::vector<double> fejer_kernel(int n, int m);

namespace serial {

/// out(r, i) = sum_k f(r, k) C(n,k) x_i^k (1-x_i)^(n-k) / sum_k C(n,k) x_i^k (1-x_i)^(n-k),
/// where f(r, k) is the r-th function evaluated at k/n (f.cols == n + 1).
void bernstein(int n, std::span<const double> x, ConstRows f, MutRows out);

/// Circular trapezoidal convolution out(r, j) = (1/m) sum_i f(r, i) K[(j - i) mod m].
void fejer(std::span<const double> kernel, ConstRows f, MutRows out);

}  // namespace serial

namespace omp {

void bernstein(int n, std::span<const double> x, ConstRows f, MutRows out);
void fejer(std::span<const double> kernel, ConstRows f, MutRows out);

}  // namespace omp

inline void bernstein(Execution exec, int n, std::span<const double> x, ConstRows f, MutRows out) {
  exec == Execution::parallel ? omp::bernstein(n, x, f, out) : serial::bernstein(n, x, f, out);
}

inline void fejer(Execution exec, std::span<const double> kernel, ConstRows f, MutRows out) {
  exec == Execution::parallel ? omp::fejer(kernel, f, out) : serial::fejer(kernel, f, out);
}

namespace detail {

/// Neighbour ratios of the binomial coefficients of degree n:
/// up[k] = C(n,k+1)/C(n,k) and down[k] = C(n,k-1)/C(n,k).
struct BinomialRatios {
  std::vector<double> up;
  std::vector<double> down;
};

BinomialRatios binomial_ratios(int n);

struct Window {
  std::size_t lo = 0;
  std::size_t len = 0;
};

/// Binomial weights around the mode for one node. Resizes `w` to n + 1 and
/// fills w[lo, lo + len) (unnormalized; the caller divides by their sum).
Window bernstein_window(int n, double x, const BinomialRatios& ratios, std::vector<double>& w);
/// One output node of the Bernstein kernel for every row of f.
void bernstein_node(int n, double x, const BinomialRatios& ratios, ConstRows f, MutRows out,
                    std::size_t i, std::vector<double>& scratch);
/// One output node of the Fejer convolution for every row of f.
void fejer_node(std::span<const double> kernel, ConstRows f, MutRows out, std::size_t j);

}  // namespace detail

}  // namespace klab::kernels
