#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "klab/kernels.hpp"

namespace klab::kernels {

std::vector<double> fejer_kernel(int n, int m) {
  if (n < 0 || m < 1) throw std::invalid_argument("fejer_kernel: require n >= 0, m >= 1");
  std::vector<double> k(static_cast<std::size_t>(m));
  const double np1 = n + 1.0;
  k[0] = np1;
  for (int d = 1; d < m; ++d) {
    const double u = 2.0 * std::numbers::pi * d / m;
    const double s = std::sin(np1 * u / 2.0) / std::sin(u / 2.0);
    k[d] = s * s / np1;
  }
  return k;
}

namespace detail {

namespace {

/// Four interleaved partial sums; with a == 1 it reproduces sum(w) bit for bit.
double dot(const double* a, const double* w, std::size_t len) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= len; k += 4) {
    s0 += a[k] * w[k];
    s1 += a[k + 1] * w[k + 1];
    s2 += a[k + 2] * w[k + 2];
    s3 += a[k + 3] * w[k + 3];
  }
  for (; k < len; ++k) s0 += a[k] * w[k];
  return (s0 + s1) + (s2 + s3);
}

double sum(const double* w, std::size_t len) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= len; k += 4) {
    s0 += w[k];
    s1 += w[k + 1];
    s2 += w[k + 2];
    s3 += w[k + 3];
  }
  for (; k < len; ++k) s0 += w[k];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

BinomialRatios binomial_ratios(int n) {
  BinomialRatios r;
  r.up.resize(static_cast<std::size_t>(n) + 1, 0.0);
  r.down.resize(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k < n; ++k) r.up[k] = (n - k) / (k + 1.0);
  for (int k = 1; k <= n; ++k) r.down[k] = k / (n - k + 1.0);
  return r;
}

Window bernstein_window(int n, double x, const BinomialRatios& ratios, std::vector<double>& w) {
  w.resize(static_cast<std::size_t>(n) + 1);
  double* p = w.data();
  if (x <= 0.0) {
    p[0] = 1.0;
    return {0, 1};
  }
  if (x >= 1.0) {
    p[n] = 1.0;
    return {static_cast<std::size_t>(n), 1};
  }
  // Mode weight from log-factorials; neighbours by the ratio recurrence.
  const int mode = std::min(n, static_cast<int>(std::floor((n + 1) * x)));
  const double log_mode = std::lgamma(n + 1.0) - std::lgamma(mode + 1.0) -
                          std::lgamma(n - mode + 1.0) + mode * std::log(x) +
                          (n - mode) * std::log1p(-x);
  const double w_mode = std::exp(log_mode);
  const double floor_w = w_mode * bernstein_weight_cutoff;
  const double odds = x / (1.0 - x);
  const double inv_odds = (1.0 - x) / x;

  p[mode] = w_mode;
  int lo = mode;
  double wk = w_mode;
  while (lo > 0) {
    const double next = wk * (ratios.down[lo] * inv_odds);
    if (next < floor_w) break;
    wk = next;
    p[--lo] = wk;
  }
  int hi = mode;
  wk = w_mode;
  while (hi < n) {
    const double next = wk * (ratios.up[hi] * odds);
    if (next < floor_w) break;
    wk = next;
    p[++hi] = wk;
  }
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo + 1)};
}

void bernstein_node(int n, double x, const BinomialRatios& ratios, ConstRows f, MutRows out,
                    std::size_t i, std::vector<double>& scratch) {
  const auto [lo, len] = bernstein_window(n, x, ratios, scratch);
  const double* w = scratch.data() + lo;
  const double total = sum(w, len);
  for (std::size_t r = 0; r < f.rows; ++r) out.row(r)[i] = dot(f.row(r).data() + lo, w, len) / total;
}

void fejer_node(std::span<const double> kernel, ConstRows f, MutRows out, std::size_t j) {
  const std::size_t m = kernel.size();
  for (std::size_t r = 0; r < f.rows; ++r) {
    const auto fr = f.row(r);
    // kernel index (j - i) mod m, split at i = j to avoid the modulo.
    double acc = 0.0;
    for (std::size_t i = 0; i <= j; ++i) acc += fr[i] * kernel[j - i];
    for (std::size_t i = j + 1; i < m; ++i) acc += fr[i] * kernel[j + m - i];
    out.row(r)[j] = acc / static_cast<double>(m);
  }
}

}  // namespace detail

namespace serial {

void bernstein(int n, std::span<const double> x, ConstRows f, MutRows out) {
  const auto ratios = detail::binomial_ratios(n);
  std::vector<double> scratch;
  scratch.reserve(static_cast<std::size_t>(n) + 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    detail::bernstein_node(n, x[i], ratios, f, out, i, scratch);
}

void fejer(std::span<const double> kernel, ConstRows f, MutRows out) {
  for (std::size_t j = 0; j < kernel.size(); ++j) detail::fejer_node(kernel, f, out, j);
}

}  // namespace serial

}  // namespace klab::kernels
