#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "klab/korovkin.hpp"
#include "oracles.hpp"

using namespace klab;

namespace {

std::vector<double> values_on(const Evaluator& f, const Grid& grid) {
  std::vector<double> v;
  for (double x : grid.nodes()) v.push_back(f(x));
  return v;
}

std::vector<std::int64_t> range(std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(hi - lo + 1));
  std::iota(v.begin(), v.end(), lo);
  return v;
}

const NamedFunction cube{"t3", [](double t) { return t * t * t; }};
const NamedFunction expo{"exp", [](double t) { return std::exp(t); }};

}  // namespace

// ---------------------------------------------------------------------------
// Budgets and the pointwise bound

TEST_CASE("estimate_budget") {
  const Grid grid = Grid::unit(200);
  const auto one = estimate_budget([](double) { return 1.0; }, grid, 0.1);
  CHECK(one.M == 1.0);
  CHECK(one.delta == 1.0);

  const Evaluator t = [](double x) { return x; };
  const auto bt = estimate_budget(t, grid, 0.1);
  CHECK(bt.delta == oracle::continuity_span(values_on(t, grid), 0.1) * grid.spacing());
  CHECK(std::abs(bt.delta - 0.1) <= grid.spacing() * (1.0 + 1e-12));

  const Evaluator t2 = [](double x) { return x * x; };
  const auto bt2 = estimate_budget(t2, grid, 0.1);
  CHECK(bt2.delta == oracle::continuity_span(values_on(t2, grid), 0.1) * grid.spacing());
  CHECK(std::abs(bt2.delta - 0.05) <= grid.spacing() * (1.0 + 1e-12));
  CHECK(bt2.M == 1.0);
  CHECK(bt2.C == doctest::Approx(std::max(1.1, 2.0 / (bt2.delta * bt2.delta))));

  CHECK_THROWS_AS(estimate_budget([](double x) { return std::sin(4000.0 * x); }, grid, 0.1),
                  std::domain_error);
}

TEST_CASE("check_pointwise_bound") {
  const Grid grid = Grid::unit(200);
  const Evaluator one = [](double) { return 1.0; };
  const auto r1 = check_pointwise_bound(one, {0.1, 0.3, 1.0, 0.0}, grid);
  CHECK(r1.passed);
  CHECK(r1.worst_slack == 0.1);

  const Evaluator t2 = [](double x) { return x * x; };
  CHECK(check_pointwise_bound(t2, estimate_budget(t2, grid, 0.1), grid).passed);

  const auto tampered = check_pointwise_bound(t2, {0.1, 1.0, 0.01, 0.0}, grid);
  CHECK_FALSE(tampered.passed);
  CHECK(tampered.worst_slack < 0.0);
  // Brute-force pair scan for the same tampered budget.
  double worst = 1e300;
  for (double t : grid.nodes())
    for (double x : grid.nodes())
      worst = std::min(worst, 0.1 + 0.02 * (t - x) * (t - x) - std::abs(t * t - x * x));
  CHECK(tampered.worst_slack == doctest::Approx(worst).epsilon(1e-14));
  CHECK(0.1 + 0.02 * (tampered.t - tampered.x) * (tampered.t - tampered.x) -
            std::abs(tampered.t * tampered.t - tampered.x * tampered.x) ==
        doctest::Approx(worst).epsilon(1e-14));
}

TEST_CASE("pointwise bound holds for the probes at both budgets") {
  // At eps = 0.01 the default 200-cell grid is too coarse for t^3 and e^t:
  // neighbouring nodes already differ by more than eps.
  CHECK_THROWS_AS(estimate_budget([](double t) { return std::exp(t); }, Grid::unit(200), 0.01),
                  std::domain_error);
  const Grid grid = Grid::unit(1000);
  const std::vector<Evaluator> probes{[](double t) { return t * t * t; },
                                      [](double t) { return std::abs(t - 0.5); },
                                      [](double t) { return std::exp(t); }};
  for (const auto& f : probes)
    for (double eps : {0.1, 0.01}) CHECK(check_pointwise_bound(f, estimate_budget(f, grid, eps), grid).passed);
}

// ---------------------------------------------------------------------------
// Bound ratios

TEST_CASE("bound ratios for t^3 match direct computation") {
  const Grid grid = Grid::unit(200);
  const auto ops = OperatorSequence::bernstein(grid);
  const auto ratios = bound_ratio_curve(ops, cube.eval, KorovkinTestSet::algebraic(), range(5, 50));
  REQUIRE(ratios.size() == 46);
  for (const auto& r : ratios) {
    REQUIRE(r.ratio.has_value());
    CHECK(*r.ratio > 0.0);
    CHECK(*r.ratio < 10.0);
    CHECK(r.denominator == doctest::Approx(0.25 / static_cast<double>(r.n)).epsilon(1e-10));
  }
  for (std::int64_t n : {5, 20, 50}) {
    double num = 0.0;
    for (double x : grid.nodes())
      num = std::max(num, std::abs(oracle::bernstein(static_cast<int>(n), cube.eval, x) - x * x * x));
    const auto& r = ratios[static_cast<std::size_t>(n - 5)];
    CHECK(r.numerator == doctest::Approx(num).epsilon(1e-10));
    CHECK(*r.ratio == doctest::Approx(num / (0.25 / static_cast<double>(n))).epsilon(1e-9));
  }
}

TEST_CASE("bound ratio of a test function is at most one") {
  const auto ops = OperatorSequence::bernstein(Grid::unit(100));
  const auto ratios =
      bound_ratio_curve(ops, [](double t) { return t * t; }, KorovkinTestSet::algebraic(), range(1, 40));
  for (const auto& r : ratios) {
    REQUIRE(r.ratio.has_value());
    CHECK(*r.ratio <= 1.0);
  }
}

TEST_CASE("bound ratio is undefined where the test set is reproduced exactly") {
  const Grid grid = Grid::unit(20);
  const auto identity = OperatorSequence::custom(
      "identity", grid, 1, [grid](std::int64_t, const Evaluator& f) { return sample(f, grid); });
  const auto ratios = bound_ratio_curve(identity, cube.eval, KorovkinTestSet::algebraic(), range(1, 5));
  for (const auto& r : ratios) CHECK_FALSE(r.ratio.has_value());
  CHECK_FALSE(ratio_band(ratios).has_value());
}

TEST_CASE("bound ratios over Bernstein stay within a factor 10 band") {
  const auto ops = OperatorSequence::bernstein(Grid::unit(200));
  for (const Evaluator& f : {Evaluator([](double t) { return t * t * t; }),
                             Evaluator([](double t) { return std::abs(t - 0.5); }),
                             Evaluator([](double t) { return std::exp(t); })}) {
    const auto ratios = bound_ratio_curve(ops, f, KorovkinTestSet::algebraic(), range(10, 200));
    const auto band = ratio_band(ratios);
    REQUIRE(band.has_value());
    CHECK(*band <= 10.0);
  }
}

// ---------------------------------------------------------------------------
// Probes

TEST_CASE("classical Korovkin with Bernstein under the norm method") {
  const Grid grid = Grid::unit(200);
  const auto ops = OperatorSequence::bernstein(grid);
  const std::vector<NamedFunction> probes{cube, expo};
  const auto report = korovkin_probe(ops, MethodSpec::norm(), KorovkinTestSet::algebraic(), probes, 200, 0.02);
  CHECK(report.tests_consistent());
  CHECK(report.probes_consistent());
  CHECK(report.verdict_equivalence);
  REQUIRE(report.test_curves.size() == 3);
  REQUIRE(report.probe_curves.size() == 2);

  // Tail supremum at n = 100 recomputed from the direct sums; B_n t^3 decreases in n.
  double direct = 0.0;
  for (int k = 100; k <= 200; ++k)
    for (double x : grid.nodes())
      direct = std::max(direct, std::abs(oracle::bernstein(k, cube.eval, x) - x * x * x));
  CHECK(report.probe_curves[0].residuals[99].second == doctest::Approx(direct).epsilon(1e-10));
  CHECK(report.test_curves[2].residuals[99].second == doctest::Approx(0.0025).epsilon(1e-10));
}

TEST_CASE("modulated squares fail the norm method for the test set") {
  const auto ops = OperatorSequence::modulated(OperatorSequence::bernstein(Grid::unit(20)),
                                               BinarySequence::perfect_squares());
  const std::vector<NamedFunction> probes{{"e0", [](double) { return 1.0; }}};
  const auto report = korovkin_probe(ops, MethodSpec::norm(), KorovkinTestSet::algebraic(), probes, 400, 0.02);
  for (const auto& c : report.test_curves) CHECK(c.verdict == Verdict::inconsistent);
  CHECK(report.probe_curves[0].verdict == Verdict::inconsistent);
  CHECK(report.verdict_equivalence);
}

TEST_CASE("modulated squares converge statistically") {
  const auto ops = OperatorSequence::modulated(OperatorSequence::bernstein(Grid::unit(20)),
                                               BinarySequence::perfect_squares());
  const std::vector<NamedFunction> probes{cube, expo};
  const std::vector<MethodSpec> methods{MethodSpec::statistical(0.1), MethodSpec::norm()};
  const auto reports = korovkin_probe(ops, methods, KorovkinTestSet::algebraic(), probes, 10'000, 0.02);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].tests_consistent());
  CHECK(reports[0].probes_consistent());
  CHECK(reports[0].verdict_equivalence);
  for (const auto& c : reports[1].test_curves) CHECK(c.verdict == Verdict::inconsistent);
  CHECK(reports[1].verdict_equivalence);
}

TEST_CASE("shared and separate probe runs agree") {
  const auto ops = OperatorSequence::bernstein(Grid::unit(30));
  const std::vector<NamedFunction> probes{cube};
  const std::vector<MethodSpec> methods{MethodSpec::strong_wp(1.0), MethodSpec::norm()};
  const auto shared = korovkin_probe(ops, methods, KorovkinTestSet::algebraic(), probes, 60, 0.02, 5);
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const auto alone = korovkin_probe(ops, methods[i], KorovkinTestSet::algebraic(), probes, 60, 0.02, 5);
    CHECK(to_json(alone) == to_json(shared[i]));
  }
}

TEST_CASE("test set must match the grid") {
  const auto fejer = OperatorSequence::fejer(Grid::trigonometric(64));
  const std::vector<NamedFunction> none;
  CHECK_THROWS_AS(korovkin_probe(fejer, MethodSpec::norm(), KorovkinTestSet::algebraic(), none, 20, 0.02),
                  std::invalid_argument);
  const auto report =
      korovkin_probe(fejer, MethodSpec::norm(), KorovkinTestSet::trigonometric(), none, 60, 0.05);
  CHECK(report.tests_consistent());
}

TEST_CASE("csv bundle names and headers") {
  const auto ops = OperatorSequence::bernstein(Grid::unit(20));
  const std::vector<NamedFunction> probes{cube};
  const auto report = korovkin_probe(ops, MethodSpec::norm(), KorovkinTestSet::algebraic(), probes, 16, 0.02);
  const auto files = csv_bundle(report);
  std::vector<std::string> names;
  for (const auto& [name, body] : files) {
    names.push_back(name);
    if (name == "ratios.csv") CHECK(body.rfind("probe,n,ratio\n", 0) == 0);
    else CHECK(body.rfind("n,residual\n", 0) == 0);
  }
  CHECK(names == std::vector<std::string>{"test_0.csv", "test_1.csv", "test_2.csv", "probe_t3.csv",
                                          "ratios.csv"});
}

// ---------------------------------------------------------------------------
// Counterexample

TEST_CASE("counterexample at N = 10^4") {
  const auto r = counterexample_run(10'000, 0.5, 0.02, 0, Grid::unit(20));
  CHECK(r.square_indices.size() == static_cast<std::size_t>(oracle::squares_up_to(10'000)));
  for (double v : r.residual_at_squares) CHECK(v == 1.0);
  CHECK(r.statistical_residual[0] == 0.01);
  CHECK(r.statistical_residual[2] == 0.01);
  CHECK(r.norm_inconsistent());
  CHECK(r.statistical_consistent());

  const auto loose = counterexample_run(10'000, 1.5, 0.02, 0, Grid::unit(20));
  CHECK(loose.statistical_residual[0] == 0.0);
}

// ---------------------------------------------------------------------------
// Squeeze harnesses

TEST_CASE("norm squeeze: statistical set inclusion across seeds") {
  const auto method = MethodSpec::statistical(0.1);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = squeeze_trial_norm(method, 2.0, seed, 200);
    CHECK(r.passed());
    if (!r.passed()) MESSAGE(r.detail);
  }
}

TEST_CASE("norm squeeze: every supported kind passes") {
  const std::vector<MethodSpec> methods{
      MethodSpec::statistical(0.1), MethodSpec::ideal_method(IdealSpec::finite_sets(), 0.1),
      MethodSpec::strong_wp(2.0), MethodSpec::a_statistical(MatrixSpec::cesaro(), 0.1),
      MethodSpec::a_strong(MatrixSpec::cesaro()), MethodSpec::a_strong(MatrixSpec::identity()),
      MethodSpec::f_statistical(ModulusSpec::sqrt(), 0.1), MethodSpec::f_strong(ModulusSpec::log1p())};
  for (const auto& m : methods) {
    for (double C : {1.0, 3.0, 10.0}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto r = squeeze_trial_norm(m, C, seed, 300, 0.02, false, seed % 3);
        CHECK_MESSAGE(r.passed(), m.label() << " C=" << C << " seed=" << seed << ": " << r.detail);
      }
    }
  }
}

TEST_CASE("norm squeeze control reports a violated hypothesis") {
  const auto r = squeeze_trial_norm(MethodSpec::statistical(0.1), 2.0, 7, 200, 0.02, true);
  CHECK_FALSE(r.hypothesis_held);
  CHECK(r.status() == "hypothesis violated");
  CHECK(r.detail.find("index 100") != std::string::npos);
}

TEST_CASE("norm squeeze rejects unsupported kinds by name") {
  CHECK_THROWS_WITH_AS(squeeze_trial_norm(MethodSpec::almost(5, 20), 2.0, 1, 50),
                       doctest::Contains("almost"), std::invalid_argument);
  CHECK_FALSE(supports_norm_squeeze(MethodKind::matrix));
  CHECK(supports_norm_squeeze(MethodKind::a_strong));
}

TEST_CASE("order squeeze") {
  for (const auto& m : {MethodSpec::almost(20, 0), MethodSpec::matrix_method(MatrixSpec::cesaro()),
                        MethodSpec::matrix_method(MatrixSpec::identity())}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = squeeze_trial_order(m, 2.0, seed, 120);
      CHECK_MESSAGE(r.passed(), m.label() << " seed=" << seed << ": " << r.detail);
      CHECK(r.verdicts[3] == Verdict::consistent);
    }
    const auto control = squeeze_trial_order(m, 2.0, 3, 120, 0.02, true);
    CHECK(control.status() == "hypothesis violated");
  }
  const auto degenerate = squeeze_trial_order(MethodSpec::matrix_method(MatrixSpec::cesaro()), 0.0, 1, 64);
  CHECK(degenerate.passed());
  CHECK(degenerate.verdicts[3] == Verdict::consistent);
  CHECK_THROWS_WITH_AS(squeeze_trial_order(MethodSpec::statistical(0.1), 2.0, 1, 50),
                       doctest::Contains("statistical"), std::invalid_argument);
}

TEST_CASE("projection control breaks the equivalence") {
  const auto r = projection_control(200, 0.02);
  for (auto v : r.test_verdicts) CHECK(v == Verdict::consistent);
  // The t^3 residual stalls at its positive floor above tau.
  CHECK(r.probe_verdict == Verdict::inconsistent);
  CHECK(r.equivalence_fails());
  CHECK(r.probe_floor == doctest::Approx(std::sqrt(3.0) / 36.0).epsilon(1e-3));
}
