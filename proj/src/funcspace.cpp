#include "klab/funcspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace klab {

namespace {

std::string format_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename Op>
SampledFunction binary(const SampledFunction& f, const SampledFunction& g, const char* what,
                       Op op) {
  require_same_grid(f.grid(), g.grid(), what);
  std::vector<double> out(f.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = op(f[k], g[k]);
  return {f.grid(), std::move(out)};
}

template <typename Op>
SampledFunction unary(const SampledFunction& f, Op op) {
  std::vector<double> out(f.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = op(f[k]);
  return {f.grid(), std::move(out)};
}

}  // namespace

Grid::Grid(double a, double b, int m, bool periodic) : a_(a), b_(b), m_(m), periodic_(periodic) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
    throw std::invalid_argument("grid: require finite a < b");
  if (m < 4) throw std::invalid_argument("grid: require m >= 4, got " + std::to_string(m));
  if (periodic && std::abs((b - a) - two_pi) > 1e-12 * two_pi)
    throw std::invalid_argument("grid: periodic grids must span 2*pi");
  auto nodes = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) + 1);
  const double h = (b - a) / m;
  for (int k = 0; k < m; ++k) (*nodes)[k] = a + k * h;
  (*nodes)[m] = b;
  nodes_ = std::move(nodes);
}

Grid Grid::unit(int m) { return {0.0, 1.0, m, false}; }

Grid Grid::trigonometric(int m) { return {0.0, two_pi, m, true}; }

SampledFunction::SampledFunction(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw std::invalid_argument("sampled function: expected " + std::to_string(grid_.size()) +
                                " values, got " + std::to_string(values_.size()));
  double norm = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k]))
      throw std::domain_error("sampled function: non-finite value at node " + std::to_string(k));
    norm = std::max(norm, std::abs(values_[k]));
  }
  if (grid_.periodic() && std::abs(values_.back() - values_.front()) > 1e-12 * (1.0 + norm))
    throw std::invalid_argument("sampled function: periodic endpoint values disagree");
}

SampledFunction SampledFunction::constant(const Grid& grid, double value) {
  return {grid, std::vector<double>(grid.size(), value)};
}

SampledFunction sample(const Evaluator& expr, const Grid& grid) {
  std::vector<double> values(grid.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double x = grid.node(k);
    const double y = expr(x);
    if (!std::isfinite(y))
      throw std::domain_error("sample: non-finite value at node " + std::to_string(k) +
                              " (x = " + format_g17(x) + ")");
    values[k] = y;
  }
  return {grid, std::move(values)};
}

double sup_norm(const SampledFunction& f) {
  double best = 0.0;
  const auto n = f.grid().distinct_size();
  for (std::size_t k = 0; k < n; ++k) best = std::max(best, std::abs(f[k]));
  return best;
}

double sup_distance(const SampledFunction& f, const SampledFunction& g) {
  require_same_grid(f.grid(), g.grid(), "sup_distance");
  double best = 0.0;
  const auto n = f.grid().distinct_size();
  for (std::size_t k = 0; k < n; ++k) best = std::max(best, std::abs(f[k] - g[k]));
  return best;
}

SampledFunction add(const SampledFunction& f, const SampledFunction& g) {
  return binary(f, g, "add", [](double x, double y) { return x + y; });
}

SampledFunction sub(const SampledFunction& f, const SampledFunction& g) {
  return binary(f, g, "sub", [](double x, double y) { return x - y; });
}

SampledFunction scale(double c, const SampledFunction& f) {
  return unary(f, [c](double x) { return c * x; });
}

SampledFunction abs(const SampledFunction& f) {
  return unary(f, [](double x) { return std::abs(x); });
}

SampledFunction max(const SampledFunction& f, const SampledFunction& g) {
  return binary(f, g, "max", [](double x, double y) { return std::max(x, y); });
}

SampledFunction min(const SampledFunction& f, const SampledFunction& g) {
  return binary(f, g, "min", [](double x, double y) { return std::min(x, y); });
}

SampledFunction pointwise(PointwiseOp op, const SampledFunction& f, const SampledFunction* g,
                          double c) {
  const auto second = [&]() -> const SampledFunction& {
    if (g == nullptr) throw std::invalid_argument("pointwise: binary op needs two operands");
    return *g;
  };
  switch (op) {
    case PointwiseOp::add: return add(f, second());
    case PointwiseOp::sub: return sub(f, second());
    case PointwiseOp::scale: return scale(c, f);
    case PointwiseOp::abs: return abs(f);
    case PointwiseOp::max: return max(f, second());
    case PointwiseOp::min: return min(f, second());
  }
  throw std::invalid_argument("pointwise: unknown op");
}

bool dominates(const SampledFunction& f, const SampledFunction& g) {
  require_same_grid(f.grid(), g.grid(), "dominates");
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f[k] > g[k]) return false;
  return true;
}

void require_same_grid(const Grid& lhs, const Grid& rhs, const char* context) {
  if (!(lhs == rhs)) throw std::invalid_argument(std::string(context) + ": grid mismatch");
}

std::string to_csv(const SampledFunction& f) {
  std::ostringstream out;
  out << "node,value\n";
  for (std::size_t k = 0; k < f.size(); ++k)
    out << format_g17(f.grid().node(k)) << ',' << format_g17(f[k]) << '\n';
  return out.str();
}

nlohmann::json to_json(const SampledFunction& f) {
  const auto& g = f.grid();
  return {{"a", g.a()},
          {"b", g.b()},
          {"m", g.m()},
          {"periodic", g.periodic()},
          {"values", std::vector<double>(f.values().begin(), f.values().end())}};
}

SampledFunction sampled_function_from_json(const nlohmann::json& j) {
  Grid grid(j.at("a").get<double>(), j.at("b").get<double>(), j.at("m").get<int>(),
            j.at("periodic").get<bool>());
  return {std::move(grid), j.at("values").get<std::vector<double>>()};
}

}  // namespace klab
