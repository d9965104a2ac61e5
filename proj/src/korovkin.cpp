#include "klab/korovkin.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace klab {

namespace {

std::mt19937_64 seeded_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool all_consistent(const std::vector<ResidualCurve>& curves) {
  return std::all_of(curves.begin(), curves.end(),
                     [](const ResidualCurve& c) { return c.verdict == Verdict::consistent; });
}

ResidualCurve curve_for(const ProbeData& data, std::size_t i, const MethodSpec& method,
                        std::int64_t N, double tau) {
  if (needs_terms(method)) {
    if (!data.has_terms())
      throw std::invalid_argument(std::string(to_string(method.kind)) +
                                  ": probe data was collected without terms");
    return residual_curve(method, data.terms[i], data.targets[i], N, tau);
  }
  return residual_curve_from_norms(method, data.norms[i], data.targets[i], N, tau);
}

/// Random shape with values in [-1, 1] and |value| = 1 at one node.
void fill_unit_shape(std::mt19937_64& rng, std::vector<double>& shape) {
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, shape.size() - 1);
  for (auto& v : shape) v = value(rng);
  shape[pick(rng)] = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
}

SampledFunction offset_by(const SampledFunction& base, double amplitude,
                          const std::vector<double>& shape) {
  std::vector<double> v(base.values().begin(), base.values().end());
  const auto width = base.grid().distinct_size();
  for (std::size_t i = 0; i < width; ++i) v[i] += amplitude * shape[i];
  if (base.grid().periodic()) v.back() = v.front();
  return {base.grid(), std::move(v)};
}

SampledFunction random_limit(std::mt19937_64& rng, const Grid& grid) {
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::vector<double> v(grid.size());
  for (auto& x : v) x = value(rng);
  return {grid, std::move(v)};
}

std::vector<double> distances(std::span<const SampledFunction> terms, const SampledFunction& limit) {
  std::vector<double> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(sup_distance(t, limit));
  return out;
}

Verdict verdict_of(const MethodSpec& method, std::span<const double> norms, std::int64_t N,
                   double tau) {
  return decide_verdict(residual_points(method, norms, N), tau);
}

}  // namespace

// ---------------------------------------------------------------------------
// Test sets

const char* to_string(TestSetFlavor flavor) {
  return flavor == TestSetFlavor::algebraic ? "algebraic" : "trigonometric";
}

KorovkinTestSet KorovkinTestSet::algebraic() {
  return {TestSetFlavor::algebraic,
          {NamedFunction{"1", [](double) { return 1.0; }},
           NamedFunction{"t", [](double t) { return t; }},
           NamedFunction{"t2", [](double t) { return t * t; }}}};
}

KorovkinTestSet KorovkinTestSet::trigonometric() {
  return {TestSetFlavor::trigonometric,
          {NamedFunction{"1", [](double) { return 1.0; }},
           NamedFunction{"cos", [](double t) { return std::cos(t); }},
           NamedFunction{"sin", [](double t) { return std::sin(t); }}}};
}

KorovkinTestSet KorovkinTestSet::for_grid(const Grid& grid) {
  return grid.periodic() ? trigonometric() : algebraic();
}

void KorovkinTestSet::require_grid(const Grid& grid) const {
  const bool periodic = flavor == TestSetFlavor::trigonometric;
  if (grid.periodic() != periodic)
    throw std::invalid_argument(std::string("korovkin: ") + to_string(flavor) +
                                " test set does not match a " +
                                (grid.periodic() ? "periodic" : "non-periodic") + " grid");
}

// ---------------------------------------------------------------------------
// Proof-chain checks

ContinuityBudget estimate_budget(const Evaluator& f, const Grid& grid, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("estimate_budget: epsilon must be positive");
  const auto values = sample(f, grid);
  const auto v = values.values();
  const auto count = v.size();
  const auto admissible = [&](std::size_t d) {
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j <= std::min(count - 1, i + d); ++j)
        if (std::abs(v[i] - v[j]) > epsilon) return false;
    return true;
  };
  if (!admissible(1))
    throw std::domain_error("estimate_budget: no admissible delta; f moves by more than epsilon "
                            "between neighbouring nodes");
  std::size_t lo = 1;
  std::size_t hi = count - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (admissible(mid)) lo = mid;
    else hi = mid - 1;
  }
  ContinuityBudget budget;
  budget.epsilon = epsilon;
  budget.delta = lo == count - 1 ? grid.b() - grid.a() : static_cast<double>(lo) * grid.spacing();
  budget.M = sup_norm(values);
  budget.C = std::max(epsilon + budget.M, 2.0 * budget.M / (budget.delta * budget.delta));
  return budget;
}

PointwiseBoundReport check_pointwise_bound(const Evaluator& f, const ContinuityBudget& budget,
                                           const Grid& grid) {
  const auto values = sample(f, grid);
  const double k = 2.0 * budget.M / (budget.delta * budget.delta);
  PointwiseBoundReport report;
  report.worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double t = grid.node(i);
      const double x = grid.node(j);
      const double psi = (t - x) * (t - x);
      const double slack = budget.epsilon + k * psi - std::abs(values[i] - values[j]);
      if (slack < report.worst_slack) {
        report.worst_slack = slack;
        report.t = t;
        report.x = x;
      }
    }
  }
  report.passed = report.worst_slack > 0.0;
  return report;
}

std::vector<BoundRatio> bound_ratio_curve(const OperatorSequence& ops, const Evaluator& f,
                                          const KorovkinTestSet& testset,
                                          std::span<const std::int64_t> indices) {
  testset.require_grid(ops.grid());
  std::vector<Evaluator> fs;
  std::vector<SampledFunction> targets;
  for (const auto& e : testset.functions) fs.push_back(e.eval);
  fs.push_back(f);
  for (const auto& g : fs) targets.push_back(sample(g, ops.grid()));

  std::vector<BoundRatio> out(indices.size());
  parallel_for(static_cast<std::int64_t>(indices.size()), Execution::parallel, [&](std::int64_t i) {
    const auto n = indices[static_cast<std::size_t>(i)];
    const auto images = ops.apply_batch(n, fs);
    BoundRatio r;
    r.n = n;
    for (std::size_t e = 0; e < 3; ++e) r.denominator += sup_distance(images[e], targets[e]);
    r.numerator = sup_distance(images[3], targets[3]);
    if (r.denominator >= bound_ratio_floor) r.ratio = r.numerator / r.denominator;
    out[static_cast<std::size_t>(i)] = r;
  });
  return out;
}

std::optional<double> ratio_band(std::span<const BoundRatio> ratios) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& r : ratios) {
    if (!r.ratio) continue;
    lo = std::min(lo, *r.ratio);
    hi = std::max(hi, *r.ratio);
  }
  if (!std::isfinite(lo)) return std::nullopt;
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Probes

ProbeData collect_probe_data(const OperatorSequence& ops, std::vector<NamedFunction> functions,
                             std::int64_t count, std::int64_t offset, bool keep_terms) {
  if (count < 1) throw std::invalid_argument("collect_probe_data: count must be >= 1");
  if (offset < 0) throw std::invalid_argument("collect_probe_data: offset must be >= 0");
  ProbeData data;
  data.operator_name = ops.name();
  data.count = count;
  data.offset = offset;
  std::vector<Evaluator> evals;
  for (const auto& f : functions) {
    evals.push_back(f.eval);
    data.targets.push_back(sample(f.eval, ops.grid()));
  }
  data.functions = std::move(functions);
  const auto width = evals.size();
  data.norms.assign(width, std::vector<double>(static_cast<std::size_t>(count)));
  std::vector<std::vector<std::optional<SampledFunction>>> slots;
  if (keep_terms)
    slots.assign(width, std::vector<std::optional<SampledFunction>>(static_cast<std::size_t>(count)));

  parallel_for(count, Execution::parallel, [&](std::int64_t k) {
    auto images = ops.apply_batch(k + 1 + offset, evals);
    for (std::size_t f = 0; f < width; ++f) {
      data.norms[f][static_cast<std::size_t>(k)] = sup_distance(images[f], data.targets[f]);
      if (keep_terms) slots[f][static_cast<std::size_t>(k)].emplace(std::move(images[f]));
    }
  });

  for (auto& row : slots) {
    std::vector<SampledFunction> terms;
    terms.reserve(row.size());
    for (auto& s : row) terms.push_back(std::move(*s));
    data.terms.push_back(std::move(terms));
  }
  return data;
}

bool KorovkinReport::tests_consistent() const { return all_consistent(test_curves); }
bool KorovkinReport::probes_consistent() const { return all_consistent(probe_curves); }

KorovkinReport korovkin_report(const ProbeData& data, const MethodSpec& method, std::int64_t N,
                               double tau) {
  method.validate();
  if (data.functions.size() < 3)
    throw std::invalid_argument("korovkin_report: probe data lacks the test set");
  const auto required = terms_required(method, N);
  if (data.count < required)
    throw std::invalid_argument("korovkin_report: method needs " + std::to_string(required) +
                                " terms, data has " + std::to_string(data.count));

  KorovkinReport report;
  report.method = method;
  report.operator_name = data.operator_name;
  report.N = N;
  report.tau = tau;
  report.offset = data.offset;
  const auto width = data.functions.size();
  std::vector<std::optional<ResidualCurve>> curves(width);
  parallel_for(static_cast<std::int64_t>(width), Execution::parallel, [&](std::int64_t i) {
    curves[static_cast<std::size_t>(i)].emplace(curve_for(data, static_cast<std::size_t>(i), method, N, tau));
  });
  for (std::size_t i = 0; i < width; ++i) {
    if (i < 3) {
      report.test_names.push_back(data.functions[i].name);
      report.test_curves.push_back(std::move(*curves[i]));
    } else {
      report.probe_names.push_back(data.functions[i].name);
      report.probe_curves.push_back(std::move(*curves[i]));
    }
  }

  const auto horizon = std::min(N, data.count);
  for (std::size_t p = 3; p < width; ++p) {
    std::vector<BoundRatio> series;
    series.reserve(static_cast<std::size_t>(horizon));
    for (std::int64_t k = 0; k < horizon; ++k) {
      const auto idx = static_cast<std::size_t>(k);
      BoundRatio r;
      r.n = k + 1 + data.offset;
      r.numerator = data.norms[p][idx];
      r.denominator = data.norms[0][idx] + data.norms[1][idx] + data.norms[2][idx];
      if (r.denominator >= bound_ratio_floor) r.ratio = r.numerator / r.denominator;
      series.push_back(r);
    }
    report.bound_ratios.push_back(std::move(series));
  }
  report.verdict_equivalence = report.tests_consistent() == report.probes_consistent();
  return report;
}

std::vector<KorovkinReport> korovkin_probe(const OperatorSequence& ops,
                                           std::span<const MethodSpec> methods,
                                           const KorovkinTestSet& testset,
                                           std::span<const NamedFunction> probes,
                                           std::int64_t N, double tau, std::int64_t offset) {
  testset.require_grid(ops.grid());
  if (methods.empty()) throw std::invalid_argument("korovkin_probe: no methods");
  std::int64_t count = 0;
  bool keep = false;
  for (const auto& m : methods) {
    m.validate();
    count = std::max(count, terms_required(m, N));
    keep = keep || needs_terms(m);
  }
  std::vector<NamedFunction> functions(testset.functions.begin(), testset.functions.end());
  functions.insert(functions.end(), probes.begin(), probes.end());
  const auto data = collect_probe_data(ops, std::move(functions), count, offset, keep);
  std::vector<KorovkinReport> reports;
  for (const auto& m : methods) reports.push_back(korovkin_report(data, m, N, tau));
  return reports;
}

KorovkinReport korovkin_probe(const OperatorSequence& ops, const MethodSpec& method,
                              const KorovkinTestSet& testset,
                              std::span<const NamedFunction> probes, std::int64_t N, double tau,
                              std::int64_t offset) {
  return std::move(
      korovkin_probe(ops, std::span(&method, 1), testset, probes, N, tau, offset).front());
}

nlohmann::json to_json(const ResidualCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& [n, r] : curve.residuals) points.push_back({n, r});
  return {{"method", curve.method.label()},
          {"verdict", to_string(curve.verdict)},
          {"residuals", std::move(points)}};
}

nlohmann::json to_json(const KorovkinReport& report) {
  nlohmann::json tests = nlohmann::json::array();
  for (std::size_t i = 0; i < report.test_curves.size(); ++i) {
    auto c = to_json(report.test_curves[i]);
    c["name"] = report.test_names[i];
    tests.push_back(std::move(c));
  }
  nlohmann::json probes = nlohmann::json::array();
  nlohmann::json ratios = nlohmann::json::object();
  for (std::size_t i = 0; i < report.probe_curves.size(); ++i) {
    auto c = to_json(report.probe_curves[i]);
    c["name"] = report.probe_names[i];
    probes.push_back(std::move(c));
    nlohmann::json series = nlohmann::json::array();
    for (const auto& r : report.bound_ratios[i])
      series.push_back({r.n, r.ratio ? nlohmann::json(*r.ratio) : nlohmann::json(nullptr)});
    ratios[report.probe_names[i]] = std::move(series);
  }
  return {{"method", to_json(report.method)},
          {"operator", report.operator_name},
          {"N", report.N},
          {"tau", report.tau},
          {"offset", report.offset},
          {"test_curves", std::move(tests)},
          {"probe_curves", std::move(probes)},
          {"bound_ratios", std::move(ratios)},
          {"verdict_equivalence", report.verdict_equivalence}};
}

std::vector<std::pair<std::string, std::string>> csv_bundle(const KorovkinReport& report) {
  std::vector<std::pair<std::string, std::string>> files;
  for (std::size_t i = 0; i < report.test_curves.size(); ++i)
    files.emplace_back("test_" + std::to_string(i) + ".csv", to_csv(report.test_curves[i].residuals));
  for (std::size_t i = 0; i < report.probe_curves.size(); ++i)
    files.emplace_back("probe_" + report.probe_names[i] + ".csv",
                       to_csv(report.probe_curves[i].residuals));
  std::ostringstream ratios;
  ratios << "probe,n,ratio\n";
  for (std::size_t i = 0; i < report.bound_ratios.size(); ++i)
    for (const auto& r : report.bound_ratios[i])
      ratios << report.probe_names[i] << ',' << r.n << ','
             << (r.ratio ? format_g(*r.ratio) : std::string("undefined")) << '\n';
  files.emplace_back("ratios.csv", ratios.str());
  return files;
}

// ---------------------------------------------------------------------------
// Counterexample

bool CounterexampleReport::norm_inconsistent() const {
  return std::all_of(norm_verdicts.begin(), norm_verdicts.end(),
                     [](Verdict v) { return v == Verdict::inconsistent; });
}

bool CounterexampleReport::statistical_consistent() const {
  return std::all_of(statistical_verdicts.begin(), statistical_verdicts.end(),
                     [](Verdict v) { return v == Verdict::consistent; });
}

CounterexampleReport counterexample_from(const ProbeData& data, std::int64_t N, double epsilon,
                                         double tau) {
  if (N < 100) throw std::invalid_argument("counterexample: N must be >= 100");
  if (!(epsilon > 0.0)) throw std::invalid_argument("counterexample: epsilon must be positive");
  if (data.count < N || data.functions.size() < 3)
    throw std::invalid_argument("counterexample: probe data does not cover the horizon");
  CounterexampleReport report;
  report.N = N;
  report.epsilon = epsilon;
  report.tau = tau;
  for (std::int64_t r = 1; r * r <= N + data.offset; ++r) {
    const auto n = r * r;
    if (n <= data.offset) continue;
    report.square_indices.push_back(n);
    report.residual_at_squares.push_back(data.norms[0][static_cast<std::size_t>(n - data.offset - 1)]);
  }
  const auto norm = MethodSpec::norm();
  const auto stat = MethodSpec::statistical(epsilon);
  for (std::size_t i = 0; i < 3; ++i) {
    report.statistical_residual[i] = residual_statistical(data.norms[i], epsilon, N);
    report.norm_verdicts[i] = verdict_of(norm, data.norms[i], N, tau);
    report.statistical_verdicts[i] = verdict_of(stat, data.norms[i], N, tau);
  }
  return report;
}

CounterexampleReport counterexample_run(std::int64_t N, double epsilon, double tau,
                                        std::int64_t offset, Grid grid) {
  if (N < 100) throw std::invalid_argument("counterexample: N must be >= 100");
  if (!(epsilon > 0.0)) throw std::invalid_argument("counterexample: epsilon must be positive");
  const auto ops = OperatorSequence::modulated(OperatorSequence::bernstein(std::move(grid)),
                                               BinarySequence::perfect_squares());
  const auto tests = KorovkinTestSet::algebraic();
  const auto data = collect_probe_data(
      ops, std::vector<NamedFunction>(tests.functions.begin(), tests.functions.end()), N, offset);
  return counterexample_from(data, N, epsilon, tau);
}

nlohmann::json to_json(const CounterexampleReport& report) {
  nlohmann::json squares = nlohmann::json::array();
  for (std::size_t i = 0; i < report.square_indices.size(); ++i)
    squares.push_back({report.square_indices[i], report.residual_at_squares[i]});
  nlohmann::json norm_v = nlohmann::json::array();
  nlohmann::json stat_v = nlohmann::json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    norm_v.push_back(to_string(report.norm_verdicts[i]));
    stat_v.push_back(to_string(report.statistical_verdicts[i]));
  }
  return {{"N", report.N},
          {"epsilon", report.epsilon},
          {"tau", report.tau},
          {"residual_at_squares", std::move(squares)},
          {"statistical_residual", report.statistical_residual},
          {"norm_verdicts", std::move(norm_v)},
          {"statistical_verdicts", std::move(stat_v)}};
}

// ---------------------------------------------------------------------------
// Squeeze harnesses

std::string SqueezeReport::status() const {
  if (!hypothesis_held) return "hypothesis violated";
  return invariant_held ? "pass" : "invariant failed";
}

bool supports_norm_squeeze(MethodKind kind) {
  switch (kind) {
    case MethodKind::statistical:
    case MethodKind::ideal:
    case MethodKind::strong_wp:
    case MethodKind::a_strong:
    case MethodKind::a_statistical:
    case MethodKind::f_statistical:
    case MethodKind::f_strong: return true;
    default: return false;
  }
}

SqueezeReport squeeze_trial_norm(const MethodSpec& method, double C, std::uint64_t seed,
                                 std::int64_t N, double tau, bool violate, std::int64_t offset) {
  method.validate();
  if (!supports_norm_squeeze(method.kind))
    throw std::invalid_argument(std::string("squeeze_trial_norm: unsupported method kind '") +
                                to_string(method.kind) + "'");
  if (!(C > 0.0)) throw std::invalid_argument("squeeze_trial_norm: C must be positive");
  if (N < 8 || offset < 0) throw std::invalid_argument("squeeze_trial_norm: need N >= 8, offset >= 0");

  SqueezeReport report;
  report.method = method.label();
  report.seed = seed;
  report.C = C;
  report.N = N;
  auto rng = seeded_rng(seed);
  const Grid grid = Grid::unit(16);
  const auto width = grid.distinct_size();
  const auto total = N + offset;
  const bool counting = method.kind == MethodKind::statistical || method.kind == MethodKind::ideal ||
                        method.kind == MethodKind::a_statistical ||
                        method.kind == MethodKind::f_statistical;
  const double eps = counting ? method.epsilon : 0.1;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> gain(0.05, 2.0);
  std::uniform_real_distribution<double> spike(1.0, 3.0);
  std::uniform_real_distribution<double> share(0.0, 0.999);

  // x, y, z: decaying background plus spikes on a sparse set of density ~ log N / N.
  std::array<SampledFunction, 4> limits{random_limit(rng, grid), random_limit(rng, grid),
                                        random_limit(rng, grid), random_limit(rng, grid)};
  std::array<std::vector<SampledFunction>, 4> terms;
  std::vector<double> shape(width);
  for (std::size_t s = 0; s < 3; ++s) {
    terms[s].reserve(static_cast<std::size_t>(total));
    for (std::int64_t k = 1; k <= total; ++k) {
      const double kd = static_cast<double>(k);
      const double r = unit(rng) < 1.0 / kd ? spike(rng) * std::max(eps, 1.0)
                                              : eps * gain(rng) / std::sqrt(kd);
      fill_unit_shape(rng, shape);
      terms[s].push_back(offset_by(limits[s], r, shape));
    }
  }
  const std::int64_t broken = offset + N / 2;
  terms[3].reserve(static_cast<std::size_t>(total));
  for (std::int64_t k = 1; k <= total; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const double bound = C * (sup_distance(terms[0][i], limits[0]) +
                              sup_distance(terms[1][i], limits[1]) +
                              sup_distance(terms[2][i], limits[2]));
    const double r = violate && k == broken ? 1.5 * bound + 0.1 : bound * share(rng);
    fill_unit_shape(rng, shape);
    terms[3].push_back(offset_by(limits[3], r, shape));
  }

  std::array<std::vector<double>, 4> norms;
  for (std::size_t s = 0; s < 4; ++s)
    norms[s] = distances(std::span(terms[s]).subspan(static_cast<std::size_t>(offset)), limits[s]);

  for (std::int64_t k = 0; k < N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (norms[3][i] > C * (norms[0][i] + norms[1][i] + norms[2][i])) {
      report.hypothesis_held = false;
      report.detail = "hypothesis violated at index " + std::to_string(k + 1 + offset);
      break;
    }
  }

  for (std::size_t s = 0; s < 4; ++s) report.verdicts[s] = verdict_of(method, norms[s], N, tau);
  if (!report.hypothesis_held) return report;

  const auto fail = [&](const std::string& why) {
    if (report.invariant_held) report.detail = why;
    report.invariant_held = false;
  };

  if (counting) {
    const double thr = eps / (3.0 * C);
    const bool inclusive = method.kind == MethodKind::a_statistical;
    const auto exceeds = [&](double r, double level) { return inclusive ? r >= level : r > level; };
    for (std::int64_t k = 0; k < N; ++k) {
      const auto i = static_cast<std::size_t>(k);
      if (exceeds(norms[3][i], eps) && !exceeds(norms[0][i], thr) && !exceeds(norms[1][i], thr) &&
          !exceeds(norms[2][i], thr)) {
        fail("set inclusion fails at index " + std::to_string(k + 1 + offset));
        break;
      }
    }
    MethodSpec lowered = method;
    lowered.epsilon = thr;
    const auto w = residual_points(method, norms[3], N);
    std::array<CurvePoints, 3> parts;
    for (std::size_t s = 0; s < 3; ++s) parts[s] = residual_points(lowered, norms[s], N);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double bound = parts[0][i].second + parts[1][i].second + parts[2][i].second;
      if (w[i].second > bound * (1.0 + 1e-12)) {
        fail("residual union bound fails at n = " + std::to_string(w[i].first));
        break;
      }
    }
  } else {
    double factor = C;
    double additive = 0.0;
    if (method.kind == MethodKind::strong_wp)
      factor = std::pow(C, method.p) * std::max(1.0, std::pow(3.0, method.p - 1.0));
    if (method.kind == MethodKind::f_strong) factor = std::ceil(C);
    const auto w = residual_points(method, norms[3], N);
    std::array<CurvePoints, 3> parts;
    for (std::size_t s = 0; s < 3; ++s) parts[s] = residual_points(method, norms[s], N);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double bound = factor * (parts[0][i].second + parts[1][i].second + parts[2][i].second);
      additive = method.kind == MethodKind::a_strong ? 1e-10 * std::max(1.0, bound) : bound * 1e-12;
      if (w[i].second > bound + additive) {
        fail("linear bound fails at n = " + std::to_string(w[i].first));
        break;
      }
    }
  }
  return report;
}

SqueezeReport squeeze_trial_order(const MethodSpec& method, double C, std::uint64_t seed,
                                  std::int64_t N, double tau, bool violate, std::int64_t offset) {
  method.validate();
  if (method.kind != MethodKind::almost && method.kind != MethodKind::matrix)
    throw std::invalid_argument(std::string("squeeze_trial_order: unsupported method kind '") +
                                to_string(method.kind) + "'");
  if (!(C >= 0.0)) throw std::invalid_argument("squeeze_trial_order: C must be nonnegative");
  if (N < 8 || offset < 0) throw std::invalid_argument("squeeze_trial_order: need N >= 8, offset >= 0");

  SqueezeReport report;
  report.method = method.label();
  report.seed = seed;
  report.C = C;
  report.N = N;
  auto rng = seeded_rng(seed);
  const Grid grid = Grid::unit(16);
  const auto width = grid.distinct_size();
  const auto T = terms_required(method, N);
  const auto total = T + offset;

  std::uniform_real_distribution<double> level(-1.0, 1.0);
  std::uniform_real_distribution<double> phi(0.5, 1.0);
  std::uniform_real_distribution<double> share(-0.999, 0.999);

  std::array<SampledFunction, 4> limits{
      SampledFunction::constant(grid, level(rng)), SampledFunction::constant(grid, level(rng)),
      SampledFunction::constant(grid, level(rng)), SampledFunction::constant(grid, level(rng))};
  // Unit-amplitude perturbation shapes phi / k, k the absolute index.
  std::array<std::vector<std::vector<double>>, 3> shapes;
  for (auto& s : shapes) {
    s.resize(static_cast<std::size_t>(total));
    for (std::int64_t k = 1; k <= total; ++k) {
      auto& v = s[static_cast<std::size_t>(k - 1)];
      v.resize(width);
      for (auto& x : v) x = phi(rng) / static_cast<double>(k);
    }
  }
  const auto build = [&](std::size_t s, double amplitude) {
    std::vector<SampledFunction> out;
    out.reserve(static_cast<std::size_t>(T));
    for (std::int64_t k = offset + 1; k <= total; ++k)
      out.push_back(offset_by(limits[s], amplitude, shapes[s][static_cast<std::size_t>(k - 1)]));
    return out;
  };

  // Amplitude that keeps the final quarter of each x, y, z curve within tau / (3C).
  double amplitude = 1.0;
  if (C > 0.0) {
    double worst = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      const auto pts = residual_points(method, build(s, 1.0), limits[s], N);
      for (std::size_t i = pts.size() - pts.size() / 4; i < pts.size(); ++i)
        worst = std::max(worst, pts[i].second);
    }
    if (worst > 0.0) amplitude = 0.5 * tau / (3.0 * C * worst);
  }

  std::array<std::vector<SampledFunction>, 4> terms;
  for (std::size_t s = 0; s < 3; ++s) terms[s] = build(s, amplitude);
  terms[3].reserve(static_cast<std::size_t>(T));
  const std::int64_t broken = T / 2;
  for (std::int64_t k = 0; k < T; ++k) {
    const auto i = static_cast<std::size_t>(k);
    std::vector<double> v(width);
    for (std::size_t node = 0; node < width; ++node) {
      const double spread = C * ((terms[0][i][node] - limits[0][node]) +
                                 (terms[1][i][node] - limits[1][node]) +
                                 (terms[2][i][node] - limits[2][node]));
      v[node] = violate && k == broken && node == 0 ? 2.0 * spread + 0.1 : spread * share(rng);
    }
    terms[3].push_back(offset_by(limits[3], 1.0, v));
  }

  const auto spread_at = [&](std::size_t i, std::size_t node) {
    return C * ((terms[0][i][node] - limits[0][node]) + (terms[1][i][node] - limits[1][node]) +
                (terms[2][i][node] - limits[2][node]));
  };
  for (std::int64_t k = 0; k < T && report.hypothesis_held; ++k) {
    const auto i = static_cast<std::size_t>(k);
    for (std::size_t node = 0; node < width; ++node) {
      if (std::abs(terms[3][i][node] - limits[3][node]) > spread_at(i, node)) {
        report.hypothesis_held = false;
        report.detail = "order hypothesis violated at index " + std::to_string(k + 1 + offset) +
                        ", node " + std::to_string(node);
        break;
      }
    }
  }

  for (std::size_t s = 0; s < 4; ++s)
    report.verdicts[s] = decide_verdict(residual_points(method, terms[s], limits[s], N), tau);
  if (!report.hypothesis_held) return report;

  const auto fail = [&](const std::string& why) {
    if (report.invariant_held) report.detail = why;
    report.invariant_held = false;
  };
  const double ulp_slack = 8.0 * DBL_EPSILON;

  if (method.kind == MethodKind::almost) {
    const std::int64_t n_max = method.almost_n_max > 0 ? method.almost_n_max : N;
    std::array<std::vector<long double>, 4> prefix;
    for (std::size_t s = 0; s < 4; ++s) {
      prefix[s].assign((static_cast<std::size_t>(T) + 1) * width, 0.0L);
      for (std::size_t k = 0; k < static_cast<std::size_t>(T); ++k)
        for (std::size_t node = 0; node < width; ++node)
          prefix[s][(k + 1) * width + node] = prefix[s][k * width + node] + terms[s][k][node];
    }
    for (std::int64_t m = 0; m <= method.almost_m && report.invariant_held; ++m) {
      const double inv = static_cast<double>(m + 1);
      for (std::int64_t n = 1; n <= n_max && report.invariant_held; ++n) {
        const auto hi = static_cast<std::size_t>(n + m) * width;
        const auto lo = static_cast<std::size_t>(n - 1) * width;
        for (std::size_t node = 0; node < width; ++node) {
          std::array<double, 4> dev{};
          for (std::size_t s = 0; s < 4; ++s)
            dev[s] = static_cast<double>(prefix[s][hi + node] - prefix[s][lo + node]) / inv -
                     limits[s][node];
          const double bound = C * (dev[0] + dev[1] + dev[2]);
          const double scale = 1.0 + std::abs(limits[3][node]) +
                               C * (std::abs(limits[0][node]) + std::abs(limits[1][node]) +
                                    std::abs(limits[2][node]) + 1.0);
          if (std::abs(dev[3]) > bound + ulp_slack * scale) {
            fail("averaged bound fails at m = " + std::to_string(m) + ", n = " +
                 std::to_string(n) + ", node " + std::to_string(node));
            break;
          }
        }
      }
    }
  } else {
    const auto& a = *method.matrix;
    for (std::int64_t n = 1; n <= N && report.invariant_held; ++n) {
      const auto row = a.row(n);
      double mass = 0.0;
      for (const auto& e : row.entries) mass += e.second;
      for (std::size_t node = 0; node < width; ++node) {
        std::array<double, 4> dev{};
        for (std::size_t s = 0; s < 4; ++s) {
          double acc = 0.0;
          for (const auto& [j, alpha] : row.entries)
            acc += alpha * terms[s][static_cast<std::size_t>(j - 1)][node];
          dev[s] = acc - mass * limits[s][node];
        }
        const double bound = C * (dev[0] + dev[1] + dev[2]);
        const double scale = mass * (1.0 + std::abs(limits[3][node]) +
                                     C * (std::abs(limits[0][node]) + std::abs(limits[1][node]) +
                                          std::abs(limits[2][node]) + 1.0));
        if (std::abs(dev[3]) > bound + ulp_slack * scale * static_cast<double>(row.entries.size())) {
          fail("weighted bound fails at row " + std::to_string(n) + ", node " + std::to_string(node));
          break;
        }
      }
    }
  }
  if (report.invariant_held && report.verdicts[3] != Verdict::consistent)
    fail(std::string("w curve is ") + to_string(report.verdicts[3]) + ", expected consistent");
  return report;
}

bool ProjectionControlReport::equivalence_fails() const {
  const bool tests = std::all_of(test_verdicts.begin(), test_verdicts.end(),
                                 [](Verdict v) { return v == Verdict::consistent; });
  return tests != (probe_verdict == Verdict::consistent);
}

ProjectionControlReport projection_control(std::int64_t N, double tau, Grid grid) {
  if (grid.periodic() || grid.a() != 0.0 || grid.b() != 1.0)
    throw std::invalid_argument("projection_control: grid must be the non-periodic [0,1] grid");
  // Quadratic interpolating g at 0, 1/2, 1.
  const auto project = [](const Evaluator& g) -> Evaluator {
    const double g0 = g(0.0), gh = g(0.5), g1 = g(1.0);
    return [=](double t) {
      return g0 * 2.0 * (t - 0.5) * (t - 1.0) - gh * 4.0 * t * (t - 1.0) + g1 * 2.0 * t * (t - 0.5);
    };
  };
  // Closed-form Bernstein images of 1, t, t^2, t^3.
  const auto image = [](int power, std::int64_t n) -> Evaluator {
    const double nd = static_cast<double>(n);
    switch (power) {
      case 0: return [](double) { return 1.0; };
      case 1: return [](double x) { return x; };
      case 2: return [nd](double x) { return x * x + (x - x * x) / nd; };
      default:
        return [nd](double x) {
          return ((nd - 1.0) * (nd - 2.0) * x * x * x + 3.0 * (nd - 1.0) * x * x + x) / (nd * nd);
        };
    }
  };
  ProjectionControlReport report;
  const auto norm = MethodSpec::norm();
  for (int power = 0; power <= 3; ++power) {
    const auto target = sample([power](double t) { return std::pow(t, power); }, grid);
    std::vector<double> norms(static_cast<std::size_t>(N));
    for (std::int64_t n = 1; n <= N; ++n)
      norms[static_cast<std::size_t>(n - 1)] = sup_distance(sample(project(image(power, n)), grid), target);
    const auto v = verdict_of(norm, norms, N, tau);
    if (power < 3) {
      report.test_verdicts[static_cast<std::size_t>(power)] = v;
    } else {
      report.probe_verdict = v;
      report.probe_floor = sup_distance(sample(project([](double t) { return t * t * t; }), grid), target);
    }
  }
  return report;
}

}  // namespace klab
