#pragma once

// Korovkin statements as executable probes: residual curves of the test set
// against those of general functions, the pointwise bound behind the proof,
// and squeeze harnesses for summability methods.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "klab/funcspace.hpp"
#include "klab/operators.hpp"
#include "klab/summability.hpp"

namespace klab {

struct NamedFunction {
  std::string name;
  Evaluator eval;
};

enum class TestSetFlavor { algebraic, trigonometric };

const char* to_string(TestSetFlavor flavor);

struct KorovkinTestSet {
  TestSetFlavor flavor = TestSetFlavor::algebraic;
  std::array<NamedFunction, 3> functions;

  /// 1, t, t^2 on [0,1].
  static KorovkinTestSet algebraic();
  /// 1, cos, sin on [0, 2pi].
  static KorovkinTestSet trigonometric();
  static KorovkinTestSet for_grid(const Grid& grid);

  /// Throws std::invalid_argument when the flavor does not match the grid.
  void require_grid(const Grid& grid) const;
};

// ---------------------------------------------------------------------------
// Proof-chain checks

struct ContinuityBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  double M = 0.0;
  double C = 0.0;
};

/// M is the grid sup norm; delta = d h for the largest node distance d with
/// |f_i - f_j| <= epsilon whenever |i - j| <= d; C = max(epsilon + M, 2M/delta^2).
/// Throws std::domain_error when even neighbouring nodes differ by more than
/// epsilon.
ContinuityBudget estimate_budget(const Evaluator& f, const Grid& grid, double epsilon);

struct PointwiseBoundReport {
  bool passed = true;
  double worst_slack = 0.0;  ///< min over pairs of the slack in the two-sided bound
  double t = 0.0;
  double x = 0.0;
};

/// Checks -eps - (2M/delta^2) psi < f(t) - f(x) < eps + (2M/delta^2) psi with
/// psi = (t - x)^2 at every pair of grid nodes.
PointwiseBoundReport check_pointwise_bound(const Evaluator& f, const ContinuityBudget& budget,
                                           const Grid& grid);

struct BoundRatio {
  std::int64_t n = 0;
  double numerator = 0.0;    ///< |L_n f - f|
  double denominator = 0.0;  ///< sum_i |L_n e_i - e_i|
  std::optional<double> ratio;  ///< unset when the denominator is below 1e-12
};

inline constexpr double bound_ratio_floor = 1e-12;

std::vector<BoundRatio> bound_ratio_curve(const OperatorSequence& ops, const Evaluator& f,
                                          const KorovkinTestSet& testset,
                                          std::span<const std::int64_t> indices);

/// Band width max/min over the defined ratios; nullopt when none is defined.
std::optional<double> ratio_band(std::span<const BoundRatio> ratios);

// ---------------------------------------------------------------------------
// Probes

/// Norms |L_{k+offset} f - f| for k = 1..count and each function, plus the
/// images themselves when kept.
struct ProbeData {
  std::string operator_name;
  std::int64_t count = 0;
  std::int64_t offset = 0;
  std::vector<NamedFunction> functions;
  std::vector<SampledFunction> targets;
  std::vector<std::vector<double>> norms;
  std::vector<std::vector<SampledFunction>> terms;  ///< empty unless kept

  bool has_terms() const { return !terms.empty(); }
};

ProbeData collect_probe_data(const OperatorSequence& ops, std::vector<NamedFunction> functions,
                             std::int64_t count, std::int64_t offset = 0,
                             bool keep_terms = false);

struct KorovkinReport {
  MethodSpec method;
  std::string operator_name;
  std::int64_t N = 0;
  double tau = 0.0;
  std::int64_t offset = 0;
  std::vector<std::string> test_names;
  std::vector<ResidualCurve> test_curves;
  std::vector<std::string> probe_names;
  std::vector<ResidualCurve> probe_curves;
  std::vector<std::vector<BoundRatio>> bound_ratios;  ///< one series per probe
  bool verdict_equivalence = false;

  bool tests_consistent() const;
  bool probes_consistent() const;
};

/// Report from precomputed data whose first three functions are the test set.
KorovkinReport korovkin_report(const ProbeData& data, const MethodSpec& method, std::int64_t N,
                               double tau);

KorovkinReport korovkin_probe(const OperatorSequence& ops, const MethodSpec& method,
                              const KorovkinTestSet& testset,
                              std::span<const NamedFunction> probes, std::int64_t N, double tau,
                              std::int64_t offset = 0);

/// Several methods over one operator pass; the images are computed once.
std::vector<KorovkinReport> korovkin_probe(const OperatorSequence& ops,
                                           std::span<const MethodSpec> methods,
                                           const KorovkinTestSet& testset,
                                           std::span<const NamedFunction> probes,
                                           std::int64_t N, double tau, std::int64_t offset = 0);

nlohmann::json to_json(const ResidualCurve& curve);
nlohmann::json to_json(const KorovkinReport& report);

/// File name -> contents: test_<i>.csv, probe_<name>.csv, ratios.csv.
std::vector<std::pair<std::string, std::string>> csv_bundle(const KorovkinReport& report);

// ---------------------------------------------------------------------------
// Counterexample

struct CounterexampleReport {
  std::int64_t N = 0;
  double epsilon = 0.0;
  double tau = 0.0;
  std::vector<std::int64_t> square_indices;
  std::vector<double> residual_at_squares;  ///< |L_n e_0 - e_0| at each square n
  std::array<double, 3> statistical_residual{};
  std::array<Verdict, 3> norm_verdicts{};
  std::array<Verdict, 3> statistical_verdicts{};

  bool norm_inconsistent() const;
  bool statistical_consistent() const;
};

/// (1 + z_n) B_n with z the perfect-square indicator, against 1, t, t^2.
CounterexampleReport counterexample_run(std::int64_t N, double epsilon, double tau = 0.02,
                                        std::int64_t offset = 0, Grid grid = Grid::unit());

/// Same, reading the test norms from data whose first three functions are the
/// algebraic test set applied by the modulated sequence.
CounterexampleReport counterexample_from(const ProbeData& data, std::int64_t N, double epsilon,
                                         double tau);

nlohmann::json to_json(const CounterexampleReport& report);

// ---------------------------------------------------------------------------
// Squeeze harnesses

struct SqueezeReport {
  std::string method;
  std::uint64_t seed = 0;
  double C = 0.0;
  std::int64_t N = 0;
  bool hypothesis_held = true;
  bool invariant_held = true;
  std::string detail;
  std::array<Verdict, 4> verdicts{};  ///< x, y, z, w

  bool passed() const { return hypothesis_held && invariant_held; }
  std::string status() const;
};

bool supports_norm_squeeze(MethodKind kind);

/// Seeds x, y, z converging under the method with controlled exceedance sets
/// and w with |w_n - w| = C (|x_n - x| + |y_n - y| + |z_n - z|) u_n, then
/// checks the finite-N consequence for the kind. `violate` breaks the
/// hypothesis at one index, which must be reported as such.
SqueezeReport squeeze_trial_norm(const MethodSpec& method, double C, std::uint64_t seed,
                                 std::int64_t N, double tau = 0.02, bool violate = false,
                                 std::int64_t offset = 0);

/// Order form for almost and matrix summability: x, y, z are constants plus
/// nonnegative O(1/n) perturbations, w sits nodewise within C times their sum.
/// `m` is the window ladder length for almost summability.
SqueezeReport squeeze_trial_order(const MethodSpec& method, double C, std::uint64_t seed,
                                  std::int64_t N, double tau = 0.02, bool violate = false,
                                  std::int64_t offset = 0);

/// Negative control: R-convergence read through the interpolating projection
/// onto span{1, t, t^2} at 0, 1/2, 1. Bernstein images of the test set
/// converge under it, the probe t^3 does not.
struct ProjectionControlReport {
  std::array<Verdict, 3> test_verdicts{};
  Verdict probe_verdict = Verdict::indeterminate;
  double probe_floor = 0.0;  ///< |P t^3 - t^3|
  bool equivalence_fails() const;
};

ProjectionControlReport projection_control(std::int64_t N, double tau, Grid grid = Grid::unit());

}  // namespace klab
