#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "klab/funcspace.hpp"

using namespace klab;

TEST_CASE("sample evaluates at every node") {
  const auto one = sample([](double) { return 1.0; }, Grid(0.0, 1.0, 10, false));
  CHECK(one.size() == 11);
  for (double v : one.values()) CHECK(v == 1.0);

  const auto sq = sample([](double t) { return t * t; }, Grid(0.0, 1.0, 4, false));
  const double expected[] = {0.0, 0.0625, 0.25, 0.5625, 1.0};
  for (std::size_t k = 0; k < 5; ++k) CHECK(sq[k] == expected[k]);

  const auto s = sample([](double t) { return std::sin(t); }, Grid::trigonometric(4));
  const double sines[] = {0.0, 1.0, 0.0, -1.0, 0.0};
  for (std::size_t k = 0; k < 5; ++k) CHECK(s[k] == doctest::Approx(sines[k]).epsilon(1e-15));
}

TEST_CASE("sample rejects non-finite values and names the node") {
  const Grid grid(0.0, 1.0, 4, false);
  try {
    sample([](double t) { return 1.0 / (t - 0.5); }, grid);
    FAIL("expected rejection");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("node 2") != std::string::npos);
  }
}

TEST_CASE("sup norm") {
  CHECK(sup_norm(SampledFunction::constant(Grid::unit(7), 1.0)) == 1.0);
  CHECK(sup_norm(sample([](double t) { return t - t * t; }, Grid::unit(10))) == 0.25);
  CHECK(sup_norm(sample([](double t) { return std::sin(t); }, Grid::trigonometric(8))) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sup norm of a periodic function skips the duplicated endpoint") {
  const Grid g = Grid::trigonometric(4);
  const SampledFunction f(g, {2.0, 0.0, 0.0, 0.0, 2.0});
  CHECK(sup_norm(f) == 2.0);
  CHECK(sup_distance(f, SampledFunction::zero(g)) == 2.0);
}

TEST_CASE("pointwise lattice operations") {
  const Grid g(0.0, 1.0, 4, false);
  const auto f = sample([](double t) { return t - 0.5; }, g);
  const auto a = abs(f);
  const double expected[] = {0.5, 0.25, 0.0, 0.25, 0.5};
  for (std::size_t k = 0; k < 5; ++k) CHECK(a[k] == expected[k]);

  const auto zero = add(f, scale(-1.0, f));
  for (double v : zero.values()) CHECK(v == 0.0);

  const auto hi = max(f, a);
  const auto lo = min(f, a);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(hi[k] == a[k]);
    CHECK(lo[k] == f[k]);
    CHECK(hi[k] + lo[k] == f[k] + a[k]);
  }
  const auto via = pointwise(PointwiseOp::scale, f, nullptr, 2.0);
  for (std::size_t k = 0; k < 5; ++k) CHECK(via[k] == 2.0 * f[k]);
}

TEST_CASE("grid mismatch is rejected") {
  const auto f = SampledFunction::constant(Grid::unit(4), 1.0);
  const auto g = SampledFunction::constant(Grid::unit(5), 1.0);
  CHECK_THROWS_AS(add(f, g), std::invalid_argument);
  CHECK_THROWS_AS(dominates(f, g), std::invalid_argument);
  CHECK_THROWS_AS(sup_distance(f, g), std::invalid_argument);
}

TEST_CASE("dominates is the nodewise order") {
  const Grid g = Grid::unit(10);
  const auto t = sample([](double x) { return x; }, g);
  const auto t2 = sample([](double x) { return x * x; }, g);
  CHECK(dominates(SampledFunction::zero(g), t2));
  CHECK_FALSE(dominates(t, t2));
  CHECK(dominates(t2, t));
  CHECK(dominates(t, t));
}

TEST_CASE("construction validates length, finiteness and periodic closure") {
  CHECK_THROWS(SampledFunction(Grid::unit(4), {0.0, 1.0}));
  CHECK_THROWS(SampledFunction(Grid::unit(4),
                               {0.0, std::numeric_limits<double>::quiet_NaN(), 1.0, 1.0, 1.0}));
  CHECK_THROWS(SampledFunction(Grid::trigonometric(4), {0.0, 1.0, 2.0, 3.0, 4.0}));
  CHECK_THROWS(Grid(0.0, 1.0, 3, false));
}

TEST_CASE("json round trip is exact") {
  const auto f = sample([](double t) { return std::exp(t) / 3.0; }, Grid::unit(13));
  const auto back = sampled_function_from_json(to_json(f));
  CHECK(back.grid() == f.grid());
  for (std::size_t k = 0; k < f.size(); ++k) CHECK(back[k] == f[k]);
}

TEST_CASE("csv lists node and value") {
  const auto csv = to_csv(SampledFunction::constant(Grid::unit(4), 1.0));
  CHECK(csv.rfind("node,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("sup norm is nondecreasing under nested refinement") {
  const std::vector<std::function<double(double)>> exprs{
      [](double t) { return std::sin(7.3 * t) * std::exp(-t); },
      [](double t) { return t * (1.0 - t) * (t - 0.37); },
      [](double t) { return std::cos(11.0 * t + 0.2); }};
  for (const auto& f : exprs) {
    double previous = 0.0;
    for (int m : {25, 50, 100, 200, 400, 800, 1600}) {
      const double s = sup_norm(sample(f, Grid::unit(m)));
      CHECK(s >= previous - 1e-12);
      previous = s;
    }
  }
}

TEST_CASE("sup norm satisfies the norm axioms on random samples") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Grid grid = Grid::unit(64);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(grid.size()), b(grid.size());
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const SampledFunction f(grid, a), g(grid, b);
    const double c = u(rng);
    CHECK(sup_norm(add(f, g)) <= (sup_norm(f) + sup_norm(g)) * (1.0 + 1e-12));
    CHECK(sup_norm(scale(c, f)) == doctest::Approx(std::abs(c) * sup_norm(f)).epsilon(1e-12));
    if (dominates(abs(f), abs(g))) CHECK(sup_norm(f) <= sup_norm(g));
    const auto smaller = scale(0.5, min(abs(f), abs(g)));
    CHECK(dominates(smaller, abs(g)));
    CHECK(sup_norm(smaller) <= sup_norm(g));
  }
}
