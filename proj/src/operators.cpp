#include "klab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "klab/kernels.hpp"

namespace klab {

namespace {

void require_unit_grid(const Grid& grid, const char* what) {
  if (grid.periodic() || grid.a() != 0.0 || grid.b() != 1.0)
    throw std::invalid_argument(std::string(what) + ": grid must be the non-periodic [0,1] grid");
}

void require_periodic_grid(const Grid& grid, const char* what) {
  if (!grid.periodic()) throw std::invalid_argument(std::string(what) + ": grid must be periodic");
}

std::vector<SampledFunction> split_rows(const Grid& grid, const std::vector<double>& block,
                                        std::size_t rows, bool close_period) {
  std::vector<SampledFunction> out;
  out.reserve(rows);
  const std::size_t width = close_period ? grid.size() - 1 : grid.size();
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> values(block.begin() + static_cast<std::ptrdiff_t>(r * width),
                               block.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    if (close_period) values.push_back(values.front());
    out.emplace_back(grid, std::move(values));
  }
  return out;
}

}  // namespace

bool is_perfect_square(std::int64_t n) {
  if (n < 0) return false;
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r * r == n;
}

BinarySequence BinarySequence::perfect_squares() {
  return {[](std::int64_t n) { return n >= 1 && is_perfect_square(n); }, "perfect squares"};
}

BinarySequence BinarySequence::zeros() {
  return {[](std::int64_t) { return false; }, "zero"};
}

BinarySequence BinarySequence::indicator(std::vector<std::int64_t> members,
                                         std::string description) {
  std::sort(members.begin(), members.end());
  return {[m = std::move(members)](std::int64_t n) {
            return std::binary_search(m.begin(), m.end(), n);
          },
          std::move(description)};
}

const char* to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::bernstein: return "bernstein";
    case OperatorKind::fejer: return "fejer";
    case OperatorKind::modulated: return "modulated";
    case OperatorKind::custom: return "custom";
  }
  return "?";
}

std::vector<SampledFunction> bernstein_apply_batch(std::int64_t n,
                                                   std::span<const Evaluator> fs,
                                                   const Grid& grid, Execution exec) {
  require_unit_grid(grid, "bernstein_apply");
  if (n < 1) throw std::invalid_argument("bernstein_apply: n must be >= 1");
  if (n > bernstein_max_degree)
    throw std::invalid_argument("bernstein_apply: n exceeds the supported degree " +
                                std::to_string(bernstein_max_degree));
  const auto knots = static_cast<std::size_t>(n) + 1;
  std::vector<double> fvals(fs.size() * knots);
  for (std::size_t r = 0; r < fs.size(); ++r) {
    for (std::size_t k = 0; k < knots; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n);
      const double v = fs[r](t);
      if (!std::isfinite(v))
        throw std::domain_error("bernstein_apply: non-finite f at Bernstein node k = " +
                                std::to_string(k) + " of n = " + std::to_string(n));
      fvals[r * knots + k] = v;
    }
  }
  std::vector<double> out(fs.size() * grid.size());
  kernels::bernstein(exec, static_cast<int>(n), grid.nodes(), {fvals, fs.size(), knots},
                     {out, fs.size(), grid.size()});
  return split_rows(grid, out, fs.size(), false);
}

SampledFunction bernstein_apply(std::int64_t n, const Evaluator& f, const Grid& grid,
                                Execution exec) {
  return std::move(bernstein_apply_batch(n, std::span(&f, 1), grid, exec).front());
}

std::vector<SampledFunction> fejer_apply_batch(std::int64_t n,
                                               std::span<const SampledFunction> fs,
                                               const Grid& grid, Execution exec) {
  require_periodic_grid(grid, "fejer_apply");
  if (n < 0) throw std::invalid_argument("fejer_apply: n must be >= 0");
  const std::size_t m = grid.distinct_size();
  std::vector<double> in(fs.size() * m);
  for (std::size_t r = 0; r < fs.size(); ++r) {
    require_same_grid(fs[r].grid(), grid, "fejer_apply");
    std::copy_n(fs[r].values().begin(), m, in.begin() + static_cast<std::ptrdiff_t>(r * m));
  }
  const auto kernel = kernels::fejer_kernel(static_cast<int>(n), static_cast<int>(m));
  std::vector<double> out(fs.size() * m);
  kernels::fejer(exec, kernel, {in, fs.size(), m}, {out, fs.size(), m});
  return split_rows(grid, out, fs.size(), true);
}

SampledFunction fejer_apply(std::int64_t n, const SampledFunction& f, const Grid& grid,
                            Execution exec) {
  return std::move(fejer_apply_batch(n, std::span(&f, 1), grid, exec).front());
}

SampledFunction modulated_apply(const OperatorSequence& base, const BinarySequence& z,
                                std::int64_t n, const Evaluator& f) {
  return scale(1.0 + z(n), base.apply(n, f));
}

OperatorSequence OperatorSequence::bernstein(Grid grid) {
  require_unit_grid(grid, "bernstein");
  auto batch = [grid](std::int64_t n, std::span<const Evaluator> fs, Execution exec) {
    return bernstein_apply_batch(n, fs, grid, exec);
  };
  return {OperatorKind::bernstein, "bernstein", grid, 1, std::move(batch)};
}

OperatorSequence OperatorSequence::fejer(Grid grid) {
  require_periodic_grid(grid, "fejer");
  auto batch = [grid](std::int64_t n, std::span<const Evaluator> fs, Execution exec) {
    std::vector<SampledFunction> sampled;
    sampled.reserve(fs.size());
    for (const auto& f : fs) sampled.push_back(sample(f, grid));
    return fejer_apply_batch(n, sampled, grid, exec);
  };
  return {OperatorKind::fejer, "fejer", grid, 0, std::move(batch)};
}

OperatorSequence OperatorSequence::modulated(OperatorSequence base, BinarySequence z) {
  std::string name = "modulated(" + base.name() + ", " + z.description + ")";
  Grid grid = base.grid();
  const auto first = base.first_index();
  auto batch = [base = std::move(base), z = std::move(z)](
                   std::int64_t n, std::span<const Evaluator> fs, Execution exec) {
    auto out = base.apply_batch(n, fs, exec);
    const double factor = 1.0 + z(n);
    if (factor != 1.0)
      for (auto& f : out) f = scale(factor, f);
    return out;
  };
  return {OperatorKind::modulated, std::move(name), std::move(grid), first, std::move(batch)};
}

OperatorSequence OperatorSequence::custom(std::string name, Grid grid, std::int64_t first_index,
                                          SingleFn apply) {
  auto batch = [apply = std::move(apply)](std::int64_t n, std::span<const Evaluator> fs,
                                          Execution) {
    std::vector<SampledFunction> out;
    out.reserve(fs.size());
    for (const auto& f : fs) out.push_back(apply(n, f));
    return out;
  };
  return {OperatorKind::custom, std::move(name), std::move(grid), first_index, std::move(batch)};
}

SampledFunction OperatorSequence::apply(std::int64_t n, const Evaluator& f,
                                        Execution exec) const {
  return std::move(apply_batch(n, std::span(&f, 1), exec).front());
}

std::vector<SampledFunction> OperatorSequence::apply_batch(std::int64_t n,
                                                           std::span<const Evaluator> fs,
                                                           Execution exec) const {
  if (n < first_index_)
    throw std::invalid_argument(name_ + ": index " + std::to_string(n) + " below first index " +
                                std::to_string(first_index_));
  return batch_(n, fs, exec);
}

Evaluator random_nonnegative_piecewise_linear(const Grid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pieces_dist(1, 12);
  std::uniform_real_distribution<double> height(0.0, 1.0);
  std::bernoulli_distribution flat(0.2);
  const int pieces = pieces_dist(rng);
  std::vector<double> knots(static_cast<std::size_t>(pieces) + 1);
  for (auto& v : knots) v = flat(rng) ? 0.0 : height(rng);
  if (grid.periodic()) knots.back() = knots.front();
  const double a = grid.a();
  const double width = grid.b() - grid.a();
  return [knots = std::move(knots), a, width, pieces](double t) {
    const double s = std::clamp((t - a) / width, 0.0, 1.0) * pieces;
    const auto i = std::min(static_cast<std::size_t>(s), static_cast<std::size_t>(pieces - 1));
    const double frac = s - static_cast<double>(i);
    return knots[i] * (1.0 - frac) + knots[i + 1] * frac;
  };
}

PositivityReport positivity_audit(const OperatorSequence& ops,
                                  std::span<const std::int64_t> indices, int trials,
                                  std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("positivity_audit: trials must be >= 1");
  std::vector<Evaluator> probes;
  probes.reserve(static_cast<std::size_t>(trials));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(trials));
  seq.generate(seeds.begin(), seeds.end());
  for (auto s : seeds) probes.push_back(random_nonnegative_piecewise_linear(ops.grid(), s));

  PositivityReport report;
  report.min_value = std::numeric_limits<double>::infinity();
  for (auto n : indices) {
    const auto outputs = ops.apply_batch(n, probes);
    double index_min = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
      for (double v : outputs[static_cast<std::size_t>(t)].values()) {
        index_min = std::min(index_min, v);
        if (v < report.min_value) {
          report.min_value = v;
          report.witness_index = n;
          report.witness_trial = t;
        }
      }
    }
    report.per_index_min.emplace_back(n, index_min);
  }
  report.passed = report.min_value >= -positivity_slack;
  return report;
}

}  // namespace klab
