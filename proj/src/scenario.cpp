#include "klab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "klab/korovkin.hpp"
#include "klab/operators.hpp"
#include "klab/summability.hpp"

namespace klab {

namespace {

using Runner = std::function<ScenarioResult(const ExperimentConfig&)>;

struct Scenario {
  std::string name;
  std::string description;
  std::vector<std::string> operators;  ///< allowed; the first is the default
  nlohmann::json method;               ///< default method; null when not applicable
  std::vector<MethodKind> method_kinds;  ///< allowed kinds; empty means any
  std::int64_t N = 200;
  double epsilon = 0.1;
  double tau = 0.02;
  std::int64_t min_N = 8;
  Runner run;
};

const std::vector<Scenario>& registry();

const Scenario* find_scenario(const std::string& name) {
  for (const auto& s : registry())
    if (s.name == name) return &s;
  return nullptr;
}

std::string known_scenarios() {
  std::string out;
  for (const auto& s : registry()) out += (out.empty() ? "" : ", ") + s.name;
  return out;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string slug(std::string s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

int default_grid_m(const std::string& op, std::int64_t N) {
  if (op != "fejer") return default_unit_nodes;
  return static_cast<int>(std::max<std::int64_t>(default_periodic_nodes, N + 2));
}

OperatorSequence make_operator(const std::string& name, int m) {
  if (name == "bernstein") return OperatorSequence::bernstein(Grid::unit(m));
  if (name == "fejer") return OperatorSequence::fejer(Grid::trigonometric(m));
  if (name == "modulated-squares")
    return OperatorSequence::modulated(OperatorSequence::bernstein(Grid::unit(m)),
                                       BinarySequence::perfect_squares());
  throw std::invalid_argument("unknown operator '" + name + "'");
}

std::vector<NamedFunction> probes_for(const Grid& grid) {
  if (grid.periodic())
    return {{"exp_cos", [](double t) { return std::exp(std::cos(t)); }},
            {"sin2", [](double t) { return std::sin(t) * std::sin(t); }}};
  return {{"t3", [](double t) { return t * t * t; }},
          {"exp", [](double t) { return std::exp(t); }}};
}

std::int64_t horizon(const ExperimentConfig& c) { return c.N - c.offset; }

void add(ScenarioResult& r, std::string name, bool passed, std::string detail = {}) {
  r.checks.push_back({std::move(name), passed, std::move(detail)});
}

/// Verifies the pointwise bound for each probe before it is used.
nlohmann::json budget_checks(ScenarioResult& r, std::span<const NamedFunction> probes,
                             const Grid& grid) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : probes) {
    const auto budget = estimate_budget(p.eval, grid, 0.1);
    const auto bound = check_pointwise_bound(p.eval, budget, grid);
    add(r, "pointwise bound " + p.name, bound.passed,
        "delta=" + fmt(budget.delta) + " M=" + fmt(budget.M) + " C=" + fmt(budget.C) +
            " worst slack " + fmt(bound.worst_slack));
    out.push_back({{"probe", p.name},
                   {"epsilon", budget.epsilon},
                   {"delta", budget.delta},
                   {"M", budget.M},
                   {"C", budget.C},
                   {"passed", bound.passed},
                   {"worst_slack", bound.worst_slack},
                   {"worst_pair", {bound.t, bound.x}}});
  }
  return out;
}

void summarize(ScenarioResult& r, const KorovkinReport& k, const std::string& prefix = {}) {
  const auto tag = prefix.empty() ? std::string() : prefix + " ";
  for (std::size_t i = 0; i < k.test_curves.size(); ++i)
    r.summary.push_back(tag + "test " + k.test_names[i] + ": " + to_string(k.test_curves[i].verdict));
  for (std::size_t i = 0; i < k.probe_curves.size(); ++i)
    r.summary.push_back(tag + "probe " + k.probe_names[i] + ": " +
                        to_string(k.probe_curves[i].verdict));
  r.summary.push_back(tag + "verdict equivalence: " + (k.verdict_equivalence ? "true" : "false"));
}

void add_bundle(ScenarioResult& r, const KorovkinReport& k, const std::string& prefix = {}) {
  for (auto& [name, body] : csv_bundle(k))
    r.files.emplace_back(prefix.empty() ? name : prefix + "_" + name, std::move(body));
}

std::string verdict_list(std::span<const Verdict> vs) {
  std::string out;
  for (auto v : vs) out += (out.empty() ? "" : ", ") + std::string(to_string(v));
  return out;
}

// ---------------------------------------------------------------------------
// Runners

ScenarioResult run_korovkin(const ExperimentConfig& c,
                            const std::function<void(ScenarioResult&, const OperatorSequence&,
                                                     const MethodSpec&)>& extra) {
  ScenarioResult r;
  r.scenario = c.scenario;
  const auto ops = make_operator(c.operator_name, c.grid_m);
  const auto method = method_from_json(c.method, c.epsilon);
  const auto testset = KorovkinTestSet::for_grid(ops.grid());
  const auto probes = probes_for(ops.grid());
  r.report["budgets"] = budget_checks(r, probes, ops.grid());
  const auto k = korovkin_probe(ops, method, testset, probes, horizon(c), c.tau, c.offset);
  add(r, "test set consistent", k.tests_consistent());
  add(r, "probes consistent", k.probes_consistent());
  add(r, "verdict equivalence", k.verdict_equivalence);
  if (extra) extra(r, ops, method);
  r.report["korovkin"] = to_json(k);
  summarize(r, k);
  add_bundle(r, k);
  return r;
}

ScenarioResult run_bernstein_classical(const ExperimentConfig& c) { return run_korovkin(c, {}); }

ScenarioResult run_fejer_trig(const ExperimentConfig& c) {
  return run_korovkin(c, [&](ScenarioResult& r, const OperatorSequence& ops, const MethodSpec&) {
    if (ops.kind() != OperatorKind::fejer) return;
    nlohmann::json eigen = nlohmann::json::array();
    const auto cosine = sample([](double t) { return std::cos(t); }, ops.grid());
    for (std::int64_t n : {9, 99}) {
      const auto image = ops.apply(n, [](double t) { return std::cos(t); });
      const double gap = sup_distance(image, scale(static_cast<double>(n) / (n + 1.0), cosine));
      add(r, "fejer eigen-relation n=" + std::to_string(n), gap <= 1e-8, "gap " + fmt(gap));
      eigen.push_back({{"n", n}, {"gap", gap}, {"residual_vs_cos", sup_distance(image, cosine)}});
    }
    r.report["fejer_eigen"] = std::move(eigen);
  });
}

ScenarioResult run_cesaro_matrix(const ExperimentConfig& c) {
  return run_korovkin(c, [&](ScenarioResult& r, const OperatorSequence&, const MethodSpec& m) {
    if (!m.matrix) return;
    const auto reg = check_regularity(*m.matrix, c.N);
    std::string failed;
    for (const auto& f : reg.failed_conditions()) failed += (failed.empty() ? "" : "; ") + f;
    add(r, "matrix regular", reg.passed(), failed.empty() ? "all three conditions hold" : failed);
    r.report["regularity"] = {{"passed", reg.passed()},
                              {"max_row_sum", reg.max_row_sum},
                              {"row_sum_at_horizon", reg.row_sum_at_horizon}};
  });
}

ScenarioResult run_counterexample(const ExperimentConfig& c) {
  ScenarioResult r;
  r.scenario = c.scenario;
  const auto ops = make_operator(c.operator_name, c.grid_m);
  const auto N = horizon(c);
  std::vector<MethodSpec> methods{MethodSpec::norm(), method_from_json(c.method, c.epsilon)};
  std::int64_t count = N;
  bool keep = false;
  for (const auto& m : methods) {
    count = std::max(count, terms_required(m, N));
    keep = keep || needs_terms(m);
  }
  const auto testset = KorovkinTestSet::algebraic();
  auto functions = std::vector<NamedFunction>(testset.functions.begin(), testset.functions.end());
  const auto probes = probes_for(ops.grid());
  r.report["budgets"] = budget_checks(r, probes, ops.grid());
  functions.insert(functions.end(), probes.begin(), probes.end());
  const auto data = collect_probe_data(ops, std::move(functions), count, c.offset, keep);

  const auto cx = counterexample_from(data, N, c.epsilon, c.tau);
  const bool unit_at_squares = std::all_of(cx.residual_at_squares.begin(),
                                           cx.residual_at_squares.end(),
                                           [](double v) { return v == 1.0; });
  add(r, "e0 residual is 1 at every square index", unit_at_squares,
      std::to_string(cx.square_indices.size()) + " squares");
  const double expected = static_cast<double>(cx.square_indices.size()) / static_cast<double>(N);
  add(r, "statistical residual of e0 equals square density",
      cx.statistical_residual[0] == expected,
      fmt(cx.statistical_residual[0], "%.17g") + " vs " + fmt(expected, "%.17g"));
  add(r, "norm verdicts inconsistent", cx.norm_inconsistent(), verdict_list(cx.norm_verdicts));
  add(r, "statistical verdicts consistent", cx.statistical_consistent(),
      verdict_list(cx.statistical_verdicts));
  r.report["counterexample"] = to_json(cx);

  nlohmann::json reports = nlohmann::json::array();
  for (const auto& m : methods) {
    const auto k = korovkin_report(data, m, N, c.tau);
    const std::string tag = slug(to_string(m.kind));
    add(r, tag + " verdict equivalence", k.verdict_equivalence);
    if (m.kind == MethodKind::norm) add(r, "norm test set inconsistent", !k.tests_consistent());
    summarize(r, k, tag);
    add_bundle(r, k, tag);
    reports.push_back(to_json(k));
  }
  r.report["korovkin"] = std::move(reports);
  return r;
}

ScenarioResult run_almost_alternating(const ExperimentConfig& c) {
  ScenarioResult r;
  r.scenario = c.scenario;
  auto method = method_from_json(c.method, c.epsilon);
  if (method.almost_n_max == 0) method.almost_n_max = 500;
  const Grid grid = Grid::unit(c.grid_m);
  const auto limit = SampledFunction::zero(grid);
  const auto T = method.almost_n_max + method.almost_m;
  std::vector<SampledFunction> terms;
  terms.reserve(static_cast<std::size_t>(T));
  for (std::int64_t k = 1; k <= T; ++k)
    terms.push_back(SampledFunction::constant(grid, (k + c.offset) % 2 == 0 ? 1.0 : -1.0));

  nlohmann::json exact = nlohmann::json::array();
  for (std::int64_t m : {10, 100, 1000}) {
    if (m > method.almost_m) continue;
    const double got = residual_almost(terms, limit, m, method.almost_n_max);
    const double want = 1.0 / static_cast<double>(m + 1);
    add(r, "almost residual m=" + std::to_string(m) + " is 1/(m+1)", got == want,
        fmt(got, "%.17g"));
    exact.push_back({{"m", m}, {"residual", got}, {"expected", want}});
  }
  const auto curve = residual_curve(method, terms, limit, horizon(c), c.tau);
  add(r, "m-indexed curve consistent", curve.verdict == Verdict::consistent,
      to_string(curve.verdict));
  r.report["almost"] = {{"method", to_json(method)}, {"exact", std::move(exact)},
                        {"curve", to_json(curve)}};
  r.files.emplace_back("almost_curve.csv", to_csv(curve.residuals));
  r.summary.push_back(std::string("m-indexed curve: ") + to_string(curve.verdict));
  return r;
}

ScenarioResult run_f_modulus_sweep(const ExperimentConfig& c) {
  ScenarioResult r;
  r.scenario = c.scenario;
  const auto points = default_modulus_sample_points();
  nlohmann::json moduli = nlohmann::json::array();
  for (const auto* name : {"sqrt", "log1p", "identity", "square"}) {
    const auto f = ModulusSpec::from_name(name);
    const auto rep = is_modulus(f, points);
    const bool negative = std::string(name) == "square";
    std::string detail;
    if (rep.subadditivity_witness)
      detail = "subadditivity witness (" + fmt(rep.subadditivity_witness->first) + ", " +
               fmt(rep.subadditivity_witness->second) + ")";
    const bool ok = negative ? (!rep.subadditive && rep.subadditivity_witness &&
                                *rep.subadditivity_witness == std::pair(1.0, 1.0))
                             : rep.passed();
    add(r, std::string("modulus ") + name + (negative ? " rejected" : " accepted"), ok, detail);
    moduli.push_back({{"name", name},
                      {"passed", rep.passed()},
                      {"zero_only_at_origin", rep.zero_only_at_origin},
                      {"subadditive", rep.subadditive},
                      {"increasing", rep.increasing},
                      {"right_continuous_at_zero", rep.right_continuous_at_zero},
                      {"unbounded", rep.unbounded}});
  }
  r.report["moduli"] = std::move(moduli);

  const auto ops = make_operator(c.operator_name, c.grid_m);
  const auto N = horizon(c);
  const auto testset = KorovkinTestSet::for_grid(ops.grid());
  std::vector<NamedFunction> functions(testset.functions.begin(), testset.functions.end());
  functions.push_back({"t3", [](double t) { return t * t * t; }});
  if (ops.grid().periodic()) functions.back() = probes_for(ops.grid()).front();
  const auto data = collect_probe_data(ops, std::move(functions), N, c.offset);

  double gap = 0.0;
  const auto ident = residual_points(MethodSpec::f_statistical(ModulusSpec::identity(), c.epsilon),
                                     data.norms[0], N);
  const auto plain = residual_points(MethodSpec::statistical(c.epsilon), data.norms[0], N);
  for (std::size_t i = 0; i < ident.size(); ++i)
    gap = std::max(gap, std::abs(ident[i].second - plain[i].second));
  add(r, "f_statistical(identity) matches statistical", gap <= 1e-12, "max gap " + fmt(gap));

  nlohmann::json reports = nlohmann::json::array();
  for (const auto* name : {"identity", "sqrt", "log1p"}) {
    for (const auto& m : {MethodSpec::f_statistical(ModulusSpec::from_name(name), c.epsilon),
                          MethodSpec::f_strong(ModulusSpec::from_name(name))}) {
      const auto k = korovkin_report(data, m, N, c.tau);
      const auto tag = slug(m.label());
      add(r, m.label() + " verdict equivalence", k.verdict_equivalence);
      summarize(r, k, tag);
      add_bundle(r, k, tag);
      reports.push_back(to_json(k));
    }
  }
  r.report["korovkin"] = std::move(reports);
  return r;
}

ScenarioResult run_squeeze_audit(const ExperimentConfig& c) {
  ScenarioResult r;
  r.scenario = c.scenario;
  const std::int64_t trials = 1000;
  const std::int64_t order_trials = 20;
  const double C = 2.0;
  const auto N = horizon(c);
  const std::vector<MethodSpec> norm_methods{
      MethodSpec::statistical(c.epsilon),
      MethodSpec::ideal_method(IdealSpec::zero_density(), c.epsilon),
      MethodSpec::ideal_method(IdealSpec::finite_sets(), c.epsilon),
      MethodSpec::strong_wp(1.0),
      MethodSpec::strong_wp(2.0),
      MethodSpec::a_statistical(MatrixSpec::cesaro(), c.epsilon),
      MethodSpec::a_strong(MatrixSpec::cesaro()),
      MethodSpec::f_statistical(ModulusSpec::sqrt(), c.epsilon),
      MethodSpec::f_strong(ModulusSpec::sqrt())};
  const std::vector<MethodSpec> order_methods{
      MethodSpec::almost(10, N), MethodSpec::almost(50, N), MethodSpec::almost(200, N),
      MethodSpec::matrix_method(MatrixSpec::cesaro()),
      MethodSpec::matrix_method(MatrixSpec::identity())};

  const auto name_of = [](const MethodSpec& m) {
    return m.kind == MethodKind::almost ? "almost(m=" + std::to_string(m.almost_m) + ")" : m.label();
  };
  std::ostringstream csv;
  csv << "method,form,trials,passed,hypothesis_violated,invariant_failed,control\n";
  nlohmann::json rows = nlohmann::json::array();
  const auto tally = [&](const MethodSpec& m, const char* form, std::int64_t count,
                         const std::function<SqueezeReport(std::uint64_t, bool)>& trial) {
    std::vector<std::optional<SqueezeReport>> reports(static_cast<std::size_t>(count));
    parallel_for(count, Execution::parallel, [&](std::int64_t t) {
      reports[static_cast<std::size_t>(t)].emplace(trial(c.seed + static_cast<std::uint64_t>(t), false));
    });
    std::int64_t passed = 0, hyp = 0, inv = 0;
    std::string first_failure;
    for (const auto& rep : reports) {
      if (rep->passed()) ++passed;
      else if (!rep->hypothesis_held) ++hyp;
      else ++inv;
      if (!rep->passed() && first_failure.empty())
        first_failure = "seed " + std::to_string(rep->seed) + ": " + rep->detail;
    }
    const auto control = trial(c.seed, true);
    add(r, std::string(form) + " squeeze " + name_of(m), passed == count,
        std::to_string(passed) + "/" + std::to_string(count) + " pass" +
            (first_failure.empty() ? "" : "; " + first_failure));
    add(r, std::string(form) + " control " + name_of(m), control.status() == "hypothesis violated",
        control.status());
    csv << '"' << name_of(m) << "\"," << form << ',' << count << ',' << passed << ',' << hyp << ','
        << inv << ',' << control.status() << '\n';
    rows.push_back({{"method", name_of(m)}, {"form", form}, {"trials", count}, {"passed", passed},
                    {"hypothesis_violated", hyp}, {"invariant_failed", inv},
                    {"control", control.status()}});
  };

  for (const auto& m : norm_methods)
    tally(m, "norm", trials, [&](std::uint64_t seed, bool violate) {
      return squeeze_trial_norm(m, C, seed, N, c.tau, violate, c.offset);
    });
  for (const auto& m : order_methods)
    tally(m, "order", order_trials, [&](std::uint64_t seed, bool violate) {
      return squeeze_trial_order(m, C, seed, N, c.tau, violate, c.offset);
    });
  const auto degenerate = squeeze_trial_order(order_methods.front(), 0.0, c.seed, N, c.tau, false,
                                              c.offset);
  add(r, "order squeeze with C=0", degenerate.passed(), degenerate.status());

  const auto projection = projection_control(std::max<std::int64_t>(N, 8), c.tau);
  add(r, "projection method breaks the equivalence", projection.equivalence_fails(),
      std::string("tests ") + verdict_list(projection.test_verdicts) + "; probe t3 " +
          to_string(projection.probe_verdict));
  r.report["squeeze"] = std::move(rows);
  r.report["projection_control"] = {{"test_verdicts", {to_string(projection.test_verdicts[0]),
                                                      to_string(projection.test_verdicts[1]),
                                                      to_string(projection.test_verdicts[2])}},
                                    {"probe_verdict", to_string(projection.probe_verdict)},
                                    {"probe_floor", projection.probe_floor}};
  r.files.emplace_back("squeeze.csv", csv.str());
  return r;
}

ScenarioResult run_regularity_audit(const ExperimentConfig& c) {
  ScenarioResult r;
  r.scenario = c.scenario;
  const auto method = method_from_json(c.method, c.epsilon);
  const auto reg = check_regularity(*method.matrix, c.N);
  add(r, "(i) bounded row sums", reg.bounded_row_sums, "max row sum " + fmt(reg.max_row_sum));
  add(r, "(ii) vanishing columns", reg.vanishing_columns);
  add(r, "(iii) row sums tend to 1", reg.unit_row_limit,
      "row sum at N " + fmt(reg.row_sum_at_horizon, "%.12f"));
  std::ostringstream csv;
  csv << "column,at_half,at_end\n";
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& col : reg.columns) {
    csv << col.column << ',' << fmt(col.at_half, "%.17g") << ',' << fmt(col.at_end, "%.17g") << '\n';
    cols.push_back({col.column, col.at_half, col.at_end});
  }
  r.report["regularity"] = {{"matrix", method.matrix->description()},
                            {"horizon", reg.horizon},
                            {"max_row_sum", reg.max_row_sum},
                            {"row_sum_at_horizon", reg.row_sum_at_horizon},
                            {"passed", reg.passed()},
                            {"failed_conditions", reg.failed_conditions()},
                            {"columns", std::move(cols)}};
  r.files.emplace_back("columns.csv", csv.str());
  for (const auto& f : reg.failed_conditions()) r.summary.push_back("failed condition " + f);
  return r;
}

const std::vector<Scenario>& registry() {
  static const std::vector<Scenario> scenarios = [] {
    const nlohmann::json cesaro = {{"kind", "matrix"}, {"matrix", {{"name", "cesaro"}}}};
    std::vector<Scenario> s;
    s.push_back({"bernstein-classical", "Bernstein operators under norm convergence",
                 {"bernstein", "modulated-squares", "fejer"}, {{"kind", "norm"}}, {}, 200, 0.1,
                 0.02, 8, run_bernstein_classical});
    s.push_back({"statistical-counterexample",
                 "(1 + z_n) B_n with z the squares: norm fails, statistical convergence holds",
                 {"modulated-squares"}, {{"kind", "statistical"}}, {}, 10'000, 0.5, 0.02, 100,
                 run_counterexample});
    s.push_back({"cesaro-matrix", "Bernstein operators under Cesaro matrix summability",
                 {"bernstein", "modulated-squares", "fejer"}, cesaro, {}, 400, 0.1, 0.02, 8,
                 run_cesaro_matrix});
    s.push_back({"almost-alternating", "almost convergence of (-1)^n to 0", {},
                 {{"kind", "almost"}, {"almost", {{"m", 1000}, {"n_max", 500}}}},
                 {MethodKind::almost}, 200, 0.1, 0.01, 8, run_almost_alternating});
    s.push_back({"fejer-trig", "Fejer means against the trigonometric test set",
                 {"fejer", "bernstein", "modulated-squares"}, {{"kind", "norm"}}, {}, 250, 0.1, 0.02,
                 8, run_fejer_trig});
    s.push_back({"f-modulus-sweep", "f-statistical and f-strong Cesaro convergence over moduli",
                 {"modulated-squares", "bernstein"}, nullptr, {}, 10'000, 0.5, 0.02, 8,
                 run_f_modulus_sweep});
    s.push_back({"squeeze-audit", "inequality-preservation harness over every method kind", {},
                 nullptr, {}, 200, 0.1, 0.02, 8, run_squeeze_audit});
    s.push_back({"regularity-audit", "regularity conditions of a summability matrix", {}, cesaro,
                 {MethodKind::matrix, MethodKind::a_statistical, MethodKind::a_strong}, 1000, 0.1,
                 0.02, 8, run_regularity_audit});
    return s;
  }();
  return scenarios;
}

bool is_nonneg_integer(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"scenario", c.scenario},
          {"method", c.method},
          {"operator", c.operator_name},
          {"N", c.N},
          {"tau", c.tau},
          {"epsilon", c.epsilon},
          {"grid_m", c.grid_m},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"offset", c.offset}};
}

ValidationResult validate_config(const nlohmann::json& j) {
  ValidationResult result;
  auto& errors = result.errors;
  if (!j.is_object()) {
    errors.push_back("config: must be a JSON object");
    return result;
  }
  static const std::set<std::string> known{"scenario", "method", "operator", "N", "tau",
                                           "epsilon", "grid_m", "seed", "output_dir", "offset"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) errors.push_back(key + ": unknown field");

  const Scenario* scenario = nullptr;
  if (!j.contains("scenario")) {
    errors.push_back("scenario: required");
  } else if (!j.at("scenario").is_string()) {
    errors.push_back("scenario: must be a string");
  } else {
    scenario = find_scenario(j.at("scenario").get<std::string>());
    if (!scenario)
      errors.push_back("scenario: unknown '" + j.at("scenario").get<std::string>() +
                       "' (known: " + known_scenarios() + ")");
  }

  ExperimentConfig c;
  if (scenario) {
    c.scenario = scenario->name;
    c.N = scenario->N;
    c.tau = scenario->tau;
    c.epsilon = scenario->epsilon;
  }

  if (j.contains("N")) {
    const auto& v = j.at("N");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 8) errors.push_back("N: must be an integer >= 8");
    else c.N = v.get<std::int64_t>();
  }
  if (j.contains("tau")) {
    const auto& v = j.at("tau");
    if (!v.is_number() || !(v.get<double>() > 0.0)) errors.push_back("tau: must be positive");
    else c.tau = v.get<double>();
  }
  if (j.contains("epsilon")) {
    const auto& v = j.at("epsilon");
    if (!v.is_number() || !(v.get<double>() > 0.0)) errors.push_back("epsilon: must be positive");
    else c.epsilon = v.get<double>();
  }
  if (j.contains("seed")) {
    if (!is_nonneg_integer(j.at("seed"))) errors.push_back("seed: must be a nonnegative integer");
    else c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("offset")) {
    if (!is_nonneg_integer(j.at("offset"))) errors.push_back("offset: must be a nonnegative integer");
    else c.offset = j.at("offset").get<std::int64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) errors.push_back("output_dir: must be a string");
    else c.output_dir = j.at("output_dir").get<std::string>();
  }

  if (scenario) {
    if (j.contains("operator")) {
      const auto& v = j.at("operator");
      if (scenario->operators.empty()) {
        if (v == "none") c.operator_name = "none";
        else errors.push_back("operator: not used by scenario " + scenario->name);
      } else if (!v.is_string() ||
                 std::find(scenario->operators.begin(), scenario->operators.end(),
                           v.get<std::string>()) == scenario->operators.end()) {
        std::string allowed;
        for (const auto& o : scenario->operators) allowed += (allowed.empty() ? "" : ", ") + o;
        errors.push_back("operator: scenario " + scenario->name + " accepts one of " + allowed);
      } else {
        c.operator_name = v.get<std::string>();
      }
    } else {
      c.operator_name = scenario->operators.empty() ? "none" : scenario->operators.front();
    }
    if (c.operator_name.empty())
      c.operator_name = scenario->operators.empty() ? "none" : scenario->operators.front();

    if (j.contains("grid_m")) {
      const auto& v = j.at("grid_m");
      if (!v.is_number_integer() || v.get<std::int64_t>() < 4 || v.get<std::int64_t>() > 100'000)
        errors.push_back("grid_m: must be an integer in [4, 100000]");
      else c.grid_m = v.get<int>();
    } else {
      c.grid_m = default_grid_m(c.operator_name, c.N);
    }

    if (j.contains("method") && !(j.at("method").is_null() && scenario->method.is_null())) {
      if (scenario->method.is_null()) {
        errors.push_back("method: not used by scenario " + scenario->name);
      } else {
        auto method_errors = method_json_errors(j.at("method"), "method");
        errors.insert(errors.end(), method_errors.begin(), method_errors.end());
        if (method_errors.empty()) c.method = j.at("method");
      }
    } else {
      c.method = scenario->method;
    }
    if (!c.method.is_null() && errors.empty()) {
      try {
        const auto m = method_from_json(c.method, c.epsilon);
        if (!scenario->method_kinds.empty() &&
            std::find(scenario->method_kinds.begin(), scenario->method_kinds.end(), m.kind) ==
                scenario->method_kinds.end())
          errors.push_back(std::string("method.kind: '") + to_string(m.kind) +
                           "' is not supported by scenario " + scenario->name);
        else if (!m.matrix && scenario->name == "regularity-audit")
          errors.push_back("method.matrix: required by scenario " + scenario->name);
        c.method = to_json(m);
      } catch (const std::exception& e) {
        errors.push_back(std::string("method: ") + e.what());
      }
    }

    const auto need = scenario->min_N + c.offset;
    if (c.N < need)
      errors.push_back("N: scenario " + scenario->name + " needs N >= " + std::to_string(need) +
                       (c.offset ? " with offset " + std::to_string(c.offset) : ""));
    if (c.operator_name == "bernstein" || c.operator_name == "modulated-squares") {
      if (c.N > bernstein_max_degree)
        errors.push_back("N: must not exceed " + std::to_string(bernstein_max_degree) +
                         " for operator " + c.operator_name);
    }
    if (c.operator_name == "fejer" && c.N > c.grid_m - 2)
      errors.push_back("N: must not exceed grid_m - 2 = " + std::to_string(c.grid_m - 2) +
                       " for operator fejer");
    if (scenario->name == "statistical-counterexample" && !(c.epsilon < 1.0))
      errors.push_back("epsilon: must lie in (0, 1) for scenario " + scenario->name);
    if (c.output_dir.empty()) c.output_dir = "results/" + scenario->name;
  }

  if (errors.empty()) result.config = std::move(c);
  return result;
}

ValidationResult validate_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    ValidationResult r;
    r.errors.push_back(std::string("config: invalid JSON: ") + e.what());
    return r;
  }
  return validate_config(j);
}

std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& s : registry()) out.push_back({s.name, s.description});
  return out;
}

bool ScenarioResult::expectation_met() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

ScenarioResult execute(const ExperimentConfig& config) {
  const auto* scenario = find_scenario(config.scenario);
  if (!scenario) throw std::invalid_argument("unknown scenario '" + config.scenario + "'");
  auto result = scenario->run(config);
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : result.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  result.report["checks"] = std::move(checks);
  result.report["expectation_met"] = result.expectation_met();
  result.report["scenario"] = config.scenario;
  result.report["config"] = to_json(config);
  return result;
}

std::string summary_text(const ScenarioResult& result, const ExperimentConfig& config) {
  std::ostringstream out;
  out << "scenario: " << config.scenario << '\n';
  out << "config: " << to_json(config).dump() << '\n';
  out << "expectation: " << (result.expectation_met() ? "met" : "NOT met") << "\n\n";
  for (const auto& c : result.checks) {
    out << (c.passed ? "PASS  " : "FAIL  ") << c.name;
    if (!c.detail.empty()) out << "  (" << c.detail << ')';
    out << '\n';
  }
  if (!result.summary.empty()) {
    out << '\n';
    for (const auto& line : result.summary) out << line << '\n';
  }
  return out.str();
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << body;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_outputs(const ScenarioResult& result, const ExperimentConfig& config,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : result.files) write_atomically(dir / name, body);
  write_atomically(dir / "report.json", result.report.dump(2) + "\n");
  write_atomically(dir / "summary.txt", summary_text(result, config));
}

}  // namespace klab
