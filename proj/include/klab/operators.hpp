#pragma once

// Positive linear operator sequences n -> L_n acting on functions over a grid
// domain: Bernstein polynomials on [0,1], Fejer means on [0, 2pi], the
// modulated sequence (1 + z_n) L_n and user-supplied operators.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "klab/funcspace.hpp"
#include "klab/parallel.hpp"

namespace klab {

inline constexpr std::int64_t bernstein_max_degree = 10'000;

bool is_perfect_square(std::int64_t n);

/// Deterministic 0/1 sequence over the positive integers.
struct BinarySequence {
  std::function<bool(std::int64_t)> membership;
  std::string description;

  int operator()(std::int64_t n) const { return membership(n) ? 1 : 0; }

  static BinarySequence perfect_squares();
  static BinarySequence zeros();
  static BinarySequence indicator(std::vector<std::int64_t> members, std::string description);
};

enum class OperatorKind { bernstein, fejer, modulated, custom };

const char* to_string(OperatorKind kind);

class OperatorSequence {
 public:
  using SingleFn = std::function<SampledFunction(std::int64_t, const Evaluator&)>;

  static OperatorSequence bernstein(Grid grid = Grid::unit());
  static OperatorSequence fejer(Grid grid = Grid::trigonometric());
  static OperatorSequence modulated(OperatorSequence base, BinarySequence z);
  /// `apply` must be linear and reentrant; positivity is what the audit checks.
  static OperatorSequence custom(std::string name, Grid grid, std::int64_t first_index,
                                 SingleFn apply);

  OperatorKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const Grid& grid() const { return grid_; }
  /// Smallest valid index: 1 for Bernstein, 0 for Fejer.
  std::int64_t first_index() const { return first_index_; }

  SampledFunction apply(std::int64_t n, const Evaluator& f,
                        Execution exec = Execution::serial) const;

  /// L_n applied to several functions at once. Bernstein shares its binomial
  /// weights across the batch, Fejer its kernel.
  std::vector<SampledFunction> apply_batch(std::int64_t n, std::span<const Evaluator> fs,
                                           Execution exec = Execution::serial) const;

 private:
  using BatchFn = std::function<std::vector<SampledFunction>(
      std::int64_t, std::span<const Evaluator>, Execution)>;

  OperatorSequence(OperatorKind kind, std::string name, Grid grid, std::int64_t first_index,
                   BatchFn batch)
      : kind_(kind), name_(std::move(name)), grid_(std::move(grid)),
        first_index_(first_index), batch_(std::move(batch)) {}

  OperatorKind kind_;
  std::string name_;
  Grid grid_;
  std::int64_t first_index_;
  BatchFn batch_;
};

/// B_n f on `grid`, evaluating f at k/n. Requires a non-periodic [0,1] grid and
/// 1 <= n <= bernstein_max_degree.
SampledFunction bernstein_apply(std::int64_t n, const Evaluator& f, const Grid& grid,
                                Execution exec = Execution::serial);

std::vector<SampledFunction> bernstein_apply_batch(std::int64_t n,
                                                   std::span<const Evaluator> fs,
                                                   const Grid& grid,
                                                   Execution exec = Execution::serial);

/// Fejer mean sigma_n f by trapezoidal quadrature of the kernel convolution.
SampledFunction fejer_apply(std::int64_t n, const SampledFunction& f, const Grid& grid,
                            Execution exec = Execution::serial);

std::vector<SampledFunction> fejer_apply_batch(std::int64_t n,
                                               std::span<const SampledFunction> fs,
                                               const Grid& grid,
                                               Execution exec = Execution::serial);

/// (1 + z(n)) * base.apply(n, f).
SampledFunction modulated_apply(const OperatorSequence& base, const BinarySequence& z,
                                std::int64_t n, const Evaluator& f);

struct PositivityReport {
  bool passed = true;
  double min_value = 0.0;  ///< smallest output value over all indices and trials
  std::int64_t witness_index = 0;
  int witness_trial = -1;
  std::vector<std::pair<std::int64_t, double>> per_index_min;
};

inline constexpr double positivity_slack = 1e-12;

/// Random nonnegative piecewise-linear probe used by the positivity audit.
Evaluator random_nonnegative_piecewise_linear(const Grid& grid, std::uint64_t seed);

/// Applies each L_n to `trials` seeded random nonnegative piecewise-linear
/// functions; passes iff every output value is >= -positivity_slack.
PositivityReport positivity_audit(const OperatorSequence& ops,
                                  std::span<const std::int64_t> indices, int trials,
                                  std::uint64_t seed);

}  // namespace klab
