#pragma once

// Summability methods as residual functionals on sequences of sampled
// functions. A residual rho(n) >= 0 whose decay encodes convergence under the
// method; decide_verdict turns a finite residual curve into a verdict.
//
// Most methods only read the norms |x_k - L|; those come in two flavours, one
// taking the sequence itself and one taking a precomputed norm profile
// (norms[k-1] = |x_k - L|). Almost and matrix summability need the terms.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "klab/funcspace.hpp"
#include "klab/parallel.hpp"

namespace klab {

using FunctionSequence = std::function<SampledFunction(std::int64_t)>;
using CurvePoints = std::vector<std::pair<std::int64_t, double>>;

// ---------------------------------------------------------------------------
// Method parameters

struct MatrixRow {
  std::vector<std::pair<std::int64_t, double>> entries;  ///< (j, alpha_nj), j >= 1
  std::optional<double> declared_sum;
};

/// Nonnegative matrix given row by row. Row n has support j <= support(n);
/// rows with a declared total that the listed entries miss by more than
/// row_sum_tolerance are rejected.
class MatrixSpec {
 public:
  using RowFn = std::function<MatrixRow(std::int64_t)>;
  using SupportFn = std::function<std::int64_t(std::int64_t)>;

  static constexpr double row_sum_tolerance = 1e-8;

  MatrixSpec(std::string name, RowFn row, SupportFn support,
             std::optional<std::int64_t> row_count = std::nullopt,
             nlohmann::json description = {});

  /// alpha_nj = scale / n for j <= n.
  static MatrixSpec cesaro(double scale = 1.0);
  static MatrixSpec identity();
  /// Explicit rows 1..rows.size().
  static MatrixSpec custom(std::vector<MatrixRow> rows);

  const std::string& name() const { return name_; }
  std::int64_t support(std::int64_t n) const { return support_(n); }
  std::optional<std::int64_t> row_count() const { return row_count_; }
  const nlohmann::json& description() const { return description_; }
  /// Set for Cesaro matrices, which admit a running-sum evaluation.
  std::optional<double> cesaro_scale() const { return cesaro_scale_; }

  /// Validated row n; throws std::out_of_range for undefined rows and
  /// std::invalid_argument for malformed ones.
  MatrixRow row(std::int64_t n) const;

 private:
  std::string name_;
  RowFn row_;
  SupportFn support_;
  std::optional<std::int64_t> row_count_;
  nlohmann::json description_;
  std::optional<double> cesaro_scale_;
};

struct ModulusSpec {
  std::string name;
  std::function<double(double)> eval;

  double operator()(double x) const { return eval(x); }

  static ModulusSpec identity();
  static ModulusSpec sqrt();
  static ModulusSpec log1p();
  /// x^2: not subadditive, kept as a negative control.
  static ModulusSpec square();
  static ModulusSpec from_name(const std::string& name);
};

enum class IdealKind { finite_sets, zero_density, custom_density };

/// Density-style ideal. `density(S, N)` maps the sorted set S within [1, N]
/// to a mass in [0, 1]; the set is negligible when that mass tends to 0.
struct IdealSpec {
  IdealKind kind = IdealKind::zero_density;
  std::string name;
  std::function<double(std::span<const std::int64_t>, std::int64_t)> density;

  /// |S within (N/2, N]| / (N - N/2): tail count standing in for finiteness.
  static IdealSpec finite_sets();
  /// |S within [1, N]| / N.
  static IdealSpec zero_density();
  static IdealSpec custom_density(
      std::string name, std::function<double(std::span<const std::int64_t>, std::int64_t)> d);
};

enum class MethodKind {
  norm,
  statistical,
  ideal,
  strong_wp,
  a_statistical,
  a_strong,
  f_statistical,
  f_strong,
  almost,
  matrix
};

const char* to_string(MethodKind kind);
std::optional<MethodKind> method_kind_from_string(const std::string& s);

struct MethodSpec {
  MethodKind kind = MethodKind::norm;
  double p = 1.0;
  double epsilon = 0.1;
  std::optional<MatrixSpec> matrix;
  std::optional<ModulusSpec> modulus;
  std::optional<IdealSpec> ideal;
  std::int64_t almost_m = 0;
  std::int64_t almost_n_max = 0;  ///< 0: use the curve horizon N

  static MethodSpec norm();
  static MethodSpec statistical(double epsilon);
  static MethodSpec ideal_method(IdealSpec ideal, double epsilon);
  static MethodSpec strong_wp(double p);
  static MethodSpec a_statistical(MatrixSpec a, double epsilon);
  static MethodSpec a_strong(MatrixSpec a);
  static MethodSpec f_statistical(ModulusSpec f, double epsilon);
  static MethodSpec f_strong(ModulusSpec f);
  static MethodSpec almost(std::int64_t m, std::int64_t n_max);
  static MethodSpec matrix_method(MatrixSpec a);

  /// Throws std::invalid_argument when a parameter the kind needs is missing
  /// or out of range.
  void validate() const;
  std::string label() const;
};

/// Field-path error list for a MethodSpec JSON object; empty when valid.
std::vector<std::string> method_json_errors(const nlohmann::json& j, const std::string& path);
MethodSpec method_from_json(const nlohmann::json& j, double default_epsilon = 0.1);
nlohmann::json to_json(const MethodSpec& method);

// ---------------------------------------------------------------------------
// Residual functionals

/// |seq(k + offset) - L| for k = 1..count.
std::vector<double> norm_profile(const FunctionSequence& seq, const SampledFunction& limit,
                                 std::int64_t count, std::int64_t offset = 0,
                                 Execution exec = Execution::parallel);

double residual_norm(const FunctionSequence& seq, const SampledFunction& limit, std::int64_t n,
                     std::int64_t offset = 0);

double residual_statistical(std::span<const double> norms, double epsilon, std::int64_t N);
double residual_statistical(const FunctionSequence& seq, const SampledFunction& limit,
                            double epsilon, std::int64_t N, std::int64_t offset = 0);

double residual_strong_wp(std::span<const double> norms, double p, std::int64_t N);
double residual_strong_wp(const FunctionSequence& seq, const SampledFunction& limit, double p,
                          std::int64_t N, std::int64_t offset = 0);

double residual_a_strong(std::span<const double> norms, const MatrixSpec& a, std::int64_t n);
double residual_a_strong(const FunctionSequence& seq, const SampledFunction& limit,
                         const MatrixSpec& a, std::int64_t n, std::int64_t offset = 0);

/// Weight of the row on {j : |x_j - L| >= epsilon}.
double residual_a_statistical(std::span<const double> norms, const MatrixSpec& a,
                              double epsilon, std::int64_t n);
double residual_a_statistical(const FunctionSequence& seq, const SampledFunction& limit,
                              const MatrixSpec& a, double epsilon, std::int64_t n,
                              std::int64_t offset = 0);

double residual_f_statistical(std::span<const double> norms, const ModulusSpec& f,
                              double epsilon, std::int64_t N);
double residual_f_statistical(const FunctionSequence& seq, const SampledFunction& limit,
                              const ModulusSpec& f, double epsilon, std::int64_t N,
                              std::int64_t offset = 0);

double residual_f_strong(std::span<const double> norms, const ModulusSpec& f, std::int64_t N);
double residual_f_strong(const FunctionSequence& seq, const SampledFunction& limit,
                         const ModulusSpec& f, std::int64_t N, std::int64_t offset = 0);

double residual_ideal(std::span<const double> norms, const IdealSpec& ideal, double epsilon,
                      std::int64_t N);
double residual_ideal(const FunctionSequence& seq, const SampledFunction& limit,
                      const IdealSpec& ideal, double epsilon, std::int64_t N,
                      std::int64_t offset = 0);

/// max over 1 <= n <= n_max of |(1/(m+1)) sum_{i=0}^{m} x_{n+i} - L|.
/// `terms[k-1]` is x_k and must cover n_max + m terms.
double residual_almost(std::span<const SampledFunction> terms, const SampledFunction& limit,
                       std::int64_t m, std::int64_t n_max);
double residual_almost(const FunctionSequence& seq, const SampledFunction& limit,
                       std::int64_t m, std::int64_t n_max, std::int64_t offset = 0);

/// Nodewise sum_j alpha_nj x_j over the row support.
SampledFunction apply_matrix(std::span<const SampledFunction> terms, const MatrixSpec& a,
                             std::int64_t n);
SampledFunction apply_matrix(const FunctionSequence& seq, const MatrixSpec& a, std::int64_t n,
                             std::int64_t offset = 0);

// ---------------------------------------------------------------------------
// Validators

struct RegularityThresholds {
  double row_sum_cap = 1e6;     ///< condition (i): sup of row sums stays below this
  double column_tolerance = 1e-2;  ///< condition (ii): alpha_{N,j} at most this
  double limit_tolerance = 1e-6;   ///< condition (iii): |row sum at N - 1| at most this
  int columns = 20;
};

struct ColumnDecay {
  std::int64_t column = 0;
  double at_half = 0.0;  ///< alpha_{N/2, j}
  double at_end = 0.0;   ///< alpha_{N, j}
};

struct RegularityReport {
  std::int64_t horizon = 0;
  double max_row_sum = 0.0;
  double row_sum_at_horizon = 0.0;
  std::vector<ColumnDecay> columns;
  bool bounded_row_sums = false;   // (i)
  bool vanishing_columns = false;  // (ii)
  bool unit_row_limit = false;     // (iii)

  bool passed() const { return bounded_row_sums && vanishing_columns && unit_row_limit; }
  std::vector<std::string> failed_conditions() const;
};

RegularityReport check_regularity(const MatrixSpec& a, std::int64_t N,
                                  RegularityThresholds thresholds = {});

struct ModulusReport {
  bool zero_only_at_origin = false;
  bool subadditive = false;
  bool increasing = false;
  bool right_continuous_at_zero = false;
  bool unbounded = false;
  std::optional<std::pair<double, double>> subadditivity_witness;
  std::optional<std::pair<double, double>> monotonicity_witness;
  std::optional<double> zero_witness;

  bool passed() const {
    return zero_only_at_origin && subadditive && increasing && right_continuous_at_zero &&
           unbounded;
  }
};

/// Nonnegative sample points that include 0; pairs are scanned in sorted order
/// so the reported subadditivity witness is the first violating pair.
std::vector<double> default_modulus_sample_points();
ModulusReport is_modulus(const ModulusSpec& f, std::span<const double> sample_points);

// ---------------------------------------------------------------------------
// Curves and verdicts

enum class Verdict { consistent, inconsistent, indeterminate };

const char* to_string(Verdict v);

/// Quartile rule over >= 8 points with strictly increasing index:
/// consistent iff every point of the final quarter is <= tau and its median
/// does not exceed the first quarter's; inconsistent iff the final quarter's
/// minimum exceeds tau and its median is not below the first quarter's by tau
/// or more, so a curve stalled above tau is inconsistent. The consistent
/// comparison uses an absolute slack of verdict_noise_floor.
inline constexpr double verdict_noise_floor = 1e-12;

Verdict decide_verdict(std::span<const std::pair<std::int64_t, double>> curve, double tau);

struct ResidualCurve {
  MethodSpec method;
  SampledFunction limit;
  CurvePoints residuals;
  Verdict verdict = Verdict::indeterminate;
};

std::string to_csv(const CurvePoints& points);

/// True for almost and matrix summability, whose residuals read the terms.
bool needs_terms(const MethodSpec& method);

/// Number of leading terms x_1..x_T the curve for horizon N reads.
std::int64_t terms_required(const MethodSpec& method, std::int64_t N);

/// Residual curve for horizon N.
///  norm:        rho(n) = max_{n<=k<=N} |x_k - L| for n = 1..max(8, ceil(N/2)) (capped at N)
///  almost:      rho(m') = residual_almost(m', n_max) for m' = 0..almost_m
///  other kinds: rho(n) = the kind's residual at horizon / row n, n = 1..N
CurvePoints residual_points(const MethodSpec& method, std::span<const double> norms,
                            std::int64_t N);
CurvePoints residual_points(const MethodSpec& method, std::span<const SampledFunction> terms,
                            const SampledFunction& limit, std::int64_t N);

ResidualCurve residual_curve(const MethodSpec& method, std::span<const SampledFunction> terms,
                             const SampledFunction& limit, std::int64_t N, double tau);
ResidualCurve residual_curve_from_norms(const MethodSpec& method, std::span<const double> norms,
                                        const SampledFunction& limit, std::int64_t N,
                                        double tau);
ResidualCurve residual_curve(const MethodSpec& method, const FunctionSequence& seq,
                             const SampledFunction& limit, std::int64_t N, double tau,
                             std::int64_t offset = 0);

}  // namespace klab
