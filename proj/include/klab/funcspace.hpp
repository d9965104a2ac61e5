#pragma once

// Discretized stand-ins for the Banach lattices C[0,1] and C_2pi(R): uniform
// grids, sampled functions, the sup norm and the pointwise lattice operations.

#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace klab {

using Evaluator = std::function<double(double)>;

inline constexpr int default_unit_nodes = 200;
inline constexpr int default_periodic_nodes = 256;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Uniform grid a + k(b-a)/m, k = 0..m. A periodic grid spans [0, 2pi] and its
/// last node is identified with the first.
class Grid {
 public:
  Grid(double a, double b, int m, bool periodic);

  static Grid unit(int m = default_unit_nodes);
  static Grid trigonometric(int m = default_periodic_nodes);

  double a() const { return a_; }
  double b() const { return b_; }
  int m() const { return m_; }
  bool periodic() const { return periodic_; }

  /// Node count, m + 1.
  std::size_t size() const { return nodes_->size(); }
  /// Nodes that carry independent values: all of them, or m for periodic grids.
  std::size_t distinct_size() const { return periodic_ ? size() - 1 : size(); }
  double node(std::size_t k) const { return (*nodes_)[k]; }
  std::span<const double> nodes() const { return *nodes_; }
  double spacing() const { return (b_ - a_) / m_; }

  friend bool operator==(const Grid& lhs, const Grid& rhs) {
    return lhs.a_ == rhs.a_ && lhs.b_ == rhs.b_ && lhs.m_ == rhs.m_ &&
           lhs.periodic_ == rhs.periodic_;
  }

 private:
  double a_;
  double b_;
  int m_;
  bool periodic_;
  std::shared_ptr<const std::vector<double>> nodes_;
};

class SampledFunction {
 public:
  /// Validates length, finiteness and (periodic grids) endpoint agreement.
  SampledFunction(Grid grid, std::vector<double> values);

  static SampledFunction constant(const Grid& grid, double value);
  static SampledFunction zero(const Grid& grid) { return constant(grid, 0.0); }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const { return values_.size(); }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// values[k] = expr(node k). Throws std::domain_error naming the node when the
/// evaluator returns a non-finite value.
SampledFunction sample(const Evaluator& expr, const Grid& grid);

/// Max |f| over nodes, skipping the duplicated endpoint of periodic grids.
double sup_norm(const SampledFunction& f);

/// sup_norm(f - g) without materializing the difference.
double sup_distance(const SampledFunction& f, const SampledFunction& g);

enum class PointwiseOp { add, sub, scale, abs, max, min };

SampledFunction add(const SampledFunction& f, const SampledFunction& g);
SampledFunction sub(const SampledFunction& f, const SampledFunction& g);
SampledFunction scale(double c, const SampledFunction& f);
SampledFunction abs(const SampledFunction& f);
SampledFunction max(const SampledFunction& f, const SampledFunction& g);
SampledFunction min(const SampledFunction& f, const SampledFunction& g);

/// Generic entry point; `c` is used by scale only, `g` by the binary ops.
SampledFunction pointwise(PointwiseOp op, const SampledFunction& f,
                          const SampledFunction* g = nullptr, double c = 1.0);

inline SampledFunction operator+(const SampledFunction& f, const SampledFunction& g) {
  return add(f, g);
}
inline SampledFunction operator-(const SampledFunction& f, const SampledFunction& g) {
  return sub(f, g);
}
inline SampledFunction operator*(double c, const SampledFunction& f) { return scale(c, f); }

/// f <= g at every node, with zero tolerance.
bool dominates(const SampledFunction& f, const SampledFunction& g);

/// Throws std::invalid_argument unless both grids are identical.
void require_same_grid(const Grid& lhs, const Grid& rhs, const char* context);

std::string to_csv(const SampledFunction& f);
nlohmann::json to_json(const SampledFunction& f);
SampledFunction sampled_function_from_json(const nlohmann::json& j);

}  // namespace klab
