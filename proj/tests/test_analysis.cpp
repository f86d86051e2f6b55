#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ul/analysis.hpp"
#include "ul/errors.hpp"

using namespace ul;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

AxisBox centred_box(int d, double side) { return {Vec::Constant(d, -side / 2), Vec::Constant(d, side / 2)}; }

Vec random_vec(int d, double s, Rng& rng) {
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = uniform(rng, -s, s);
  return x;
}

TestFunction random_function(int d, Rng& rng) {
  const auto kind = rng() % 4;
  auto rvec = [&](double s) { return random_vec(d, s, rng); };
  if (kind == 0) return TestFunction::gaussian(d, uniform(rng, 0.5, 1.5));
  if (kind == 1) {
    const Vec lo = rvec(0.5);
    return TestFunction::box({lo, lo + Vec::NullaryExpr(d, [&](Eigen::Index) { return uniform(rng, 0.2, 0.8); })});
  }
  if (kind == 2)
    return TestFunction::combination({{Complex(uniform(rng, -1, 1), uniform(rng, -1, 1)), TestFunction::gaussian(d, 0.8)},
                                      {Complex(uniform(rng, -1, 1), 0.0),
                                       TestFunction::modulated(TestFunction::gaussian(d, 1.2), rvec(1.0))}});
  return TestFunction::translated(TestFunction::modulated(TestFunction::gaussian(d, 1.0), rvec(1.0)), rvec(1.0));
}

}  // namespace

TEST_CASE("Gaussian normalization and self duality") {
  for (int d = 1; d <= 3; ++d) {
    const TestFunction g = TestFunction::gaussian(d, 1.0);
    CHECK(g.evaluate(Vec::Zero(d)) == Complex(1.0, 0.0));
    CHECK(g.evaluate_hat(Vec::Zero(d)) == Complex(1.0, 0.0));
    Rng rng(d);
    for (int i = 0; i < 50; ++i) {
      const Vec x = Vec::NullaryExpr(d, [&](Eigen::Index) { return uniform(rng, -2, 2); });
      CHECK(std::abs(g.evaluate(x) - g.evaluate_hat(x)) <= 1e-15);
    }
  }
}

TEST_CASE("box transform is a product of sinc factors") {
  const TestFunction b = TestFunction::box(centred_box(2, 1.0));
  CHECK(b.evaluate_hat(Vec::Zero(2)) == Complex(1.0, 0.0));
  const Vec xi = v2(0.3, -1.7);
  const double expect = std::sin(oracle::pi * 0.3) / (oracle::pi * 0.3) * std::sin(oracle::pi * 1.7) / (oracle::pi * 1.7);
  CHECK(std::abs(b.evaluate_hat(xi) - expect) <= 1e-15);
}

TEST_CASE("transform sign convention against numerical quadrature") {
  const TestFunction mod = TestFunction::modulated(TestFunction::gaussian(1, 1.0), v1(0.7));
  CHECK(std::abs(mod.evaluate_hat(v1(-0.7)) - 1.0) <= 1e-15);
  const auto numeric = oracle::fourier_1d([&](double x) { return mod.evaluate(v1(x)); }, -0.7, 8.0, 200000);
  CHECK(std::abs(numeric - 1.0) <= 1e-6);

  const TestFunction shifted = TestFunction::translated(
      TestFunction::modulated(TestFunction::box({v1(-0.3), v1(0.5)}), v1(1.3)), v1(0.4));
  const TestFunction combo = TestFunction::combination(
      {{Complex(0.5, -1.0), TestFunction::gaussian(1, 0.7)}, {Complex(2.0, 0.0), shifted}});
  for (const TestFunction* f : {&mod, &shifted, &combo})
    for (double xi : {-2.1, -0.4, 0.0, 0.9, 3.3}) {
      const auto q = oracle::fourier_1d([&](double x) { return f->evaluate(v1(x)); }, xi, 8.0, 400000, {0.1, 0.9});
      CHECK(std::abs(q - f->evaluate_hat(v1(xi))) <= 1e-6);
    }
}

TEST_CASE("energy closed forms") {
  CHECK(TestFunction::gaussian(1, 1.0).energy() == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(TestFunction::gaussian(3, 2.0).energy() == doctest::Approx(std::pow(2.0, 1.5)));
  CHECK(TestFunction::box(centred_box(2, 0.5)).energy() == doctest::Approx(0.25));
  const double e = oracle::simpson([](double x) { return std::exp(-2 * oracle::pi * x * x / 0.49); }, -8, 8, 20000);
  CHECK(TestFunction::gaussian(1, 0.7).energy() == doctest::Approx(e).epsilon(1e-12));
}

TEST_CASE("invalid constructions are rejected") {
  CHECK_THROWS_AS(TestFunction::gaussian(0, 1.0), PreconditionError);
  CHECK_THROWS_AS(TestFunction::gaussian(1, -1.0), PreconditionError);
  CHECK_THROWS_AS(TestFunction::combination({}), PreconditionError);
  CHECK_THROWS_AS(TestFunction::combination({{1.0, TestFunction::gaussian(1, 1)}, {1.0, TestFunction::gaussian(2, 1)}}),
                  PreconditionError);
  CHECK_THROWS_AS(TestFunction::gaussian(2, 1.0).evaluate(v1(0)), PreconditionError);
}

TEST_CASE("tail_energy examples") {
  const TestFunction g = TestFunction::gaussian(1, 1.0);
  const Estimate none = tail_energy(g, Side::space, make_ball_set(Vec::Zero(1), 50.0));
  CHECK(none.value <= 1e-15);
  const double total = tail_energy(g, Side::space, EuclideanSet(1)).value;
  CHECK(total == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-15));
  for (double t : {0.5, 1.0, 1.5}) {
    const double truth = oracle::gaussian_tail_1d(t);
    const EuclideanSet interval = make_ball_set(Vec::Zero(1), t);
    TailOptions o;
    o.method = TailMethod::closed_form;
    CHECK(tail_energy(g, Side::space, interval, o).value == doctest::Approx(truth).epsilon(1e-8));
    o.method = TailMethod::grid;
    CHECK(tail_energy(g, Side::frequency, make_box_set(v1(-t), v1(t)), o).value == doctest::Approx(truth).epsilon(1e-8));
  }
}

TEST_CASE("tail_energy methods agree in two dimensions") {
  const TestFunction g = TestFunction::translated(TestFunction::gaussian(2, 0.8), v2(0.3, -0.2));
  const EuclideanSet s = make_ball_set(v2(0.3, -0.2), 0.6);
  TailOptions closed, grid, mc;
  closed.method = TailMethod::closed_form;
  grid.method = TailMethod::grid;
  mc.method = TailMethod::monte_carlo;
  mc.seed = 4;
  const Estimate a = tail_energy(g, Side::space, s, closed);
  const Estimate b = tail_energy(g, Side::space, s, grid);
  const Estimate c = tail_energy(g, Side::space, s, mc);
  CHECK(a.exact);
  CHECK(b.value == doctest::Approx(a.value).epsilon(1e-8));
  CHECK(std::abs(c.value - a.value) <= 3 * c.std_error);
  CHECK_THROWS_AS(tail_energy(TestFunction::box(centred_box(2, 1)), Side::space, s, closed), PreconditionError);
}

TEST_CASE("periodization coefficient formula is exact") {
  Rng rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    const TestFunction f = random_function(d, rng);
    const RandomLattice l = RandomLattice::draw(d, rng);
    const Periodization g(f, l);
    IntVec m(static_cast<std::size_t>(d));
    for (int& mi : m) mi = static_cast<int>(rng() % 9) - 4;
    Vec mv(d);
    for (int i = 0; i < d; ++i) mv[i] = m[static_cast<std::size_t>(i)];
    const Complex want = std::sqrt(l.v()) * f.evaluate_hat(l.v() * (l.rho().matrix().transpose() * mv));
    CHECK(std::abs(g.coefficient(m) - want) <= 1e-12 * (1.0 + std::abs(want)));
  }
}

TEST_CASE("coefficient(0) and periodicity") {
  Rng rng(7);
  for (int d = 1; d <= 2; ++d) {
    const RandomLattice l = RandomLattice::draw(d, rng);
    const TestFunction g = TestFunction::gaussian(d, 1.0);
    const Periodization p(g, l);
    CHECK(std::abs(p.coefficient(IntVec(static_cast<std::size_t>(d), 0)) - std::sqrt(l.v()) * g.evaluate_hat(Vec::Zero(d))) <= 1e-15);
    for (int i = 0; i < 20; ++i) {
      const Vec t = Vec::NullaryExpr(d, [&](Eigen::Index) { return uniform(rng, 0, 1); });
      for (int axis = 0; axis < d; ++axis)
        CHECK(std::abs(p.value(t) - p.value(t + Vec::Unit(d, axis))) <= 1e-9);
    }
  }
}

TEST_CASE("torus coefficients of a Gaussian source match a grid transform") {
  Rng rng(21);
  for (int d = 1; d <= 2; ++d) {
    const RandomLattice l = RandomLattice::draw(d, rng);
    const Periodization p(TestFunction::translated(TestFunction::gaussian(d, 1.3), Vec::Constant(d, 0.2)), l);
    for (int trial = 0; trial < 5; ++trial) {
      IntVec m(static_cast<std::size_t>(d));
      for (int& mi : m) mi = static_cast<int>(rng() % 5) - 2;
      const Complex grid = oracle::torus_coefficient(p, m, 48);
      CHECK(std::abs(grid - p.coefficient(m)) <= 1e-10);
    }
    const double grid_energy = oracle::torus_energy(p, 48);
    CHECK(std::abs(p.coefficient_energy() - grid_energy) <= 1e-6 * grid_energy);
    CHECK(std::abs(p.energy() - grid_energy) <= 1e-6 * grid_energy);
  }
}

TEST_CASE("Parseval for Gaussian, box and mixed sources") {
  Rng rng(55);
  for (int d = 1; d <= 3; ++d)
    for (int trial = 0; trial < 8; ++trial) {
      const TestFunction f = random_function(d, rng);
      const Periodization p(f, RandomLattice::draw(d, rng));
      const double a = p.coefficient_energy();
      const double b = p.energy();
      CHECK(std::abs(a - b) <= 1e-6 * b);
    }
}

TEST_CASE("support_fraction bound and vanishing support") {
  Rng rng(13);
  for (int d = 1; d <= 2; ++d) {
    const double side = std::pow(std::pow(2.0, -d - 1), 1.0 / d);
    const TestFunction f = TestFunction::box(centred_box(d, side));
    const int n = d == 1 ? 4096 : 256;
    for (int i = 0; i < 20; ++i) {
      const Periodization p(f, RandomLattice::draw(d, rng));
      CHECK(p.support_fraction(n) <= 0.5 + 2.0 * d / n);
    }
  }
  const TestFunction tiny = TestFunction::box(centred_box(2, 2e-3));
  for (int i = 0; i < 5; ++i) CHECK(Periodization(tiny, RandomLattice::draw(2, rng)).support_fraction(256) <= 1e-2);
  CHECK_THROWS_AS(Periodization(TestFunction::gaussian(2, 1), RandomLattice::draw(2, rng)).support_fraction(64),
                  PreconditionError);
}

TEST_CASE("support_fraction under the reflection absorbed by rho") {
  // In d = 1, rho = -1 with box [a, b] equals rho = +1 with box [-b, -a].
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const double a = uniform(rng, -0.5, 0.2), b = a + uniform(rng, 0.05, 0.3);
    const double v = uniform(rng, 1.01, 1.99);
    const Periodization flipped(TestFunction::box({v1(a), v1(b)}), RandomLattice(Rotation(-Mat::Identity(1, 1)), v));
    const Periodization mirrored(TestFunction::box({v1(-b), v1(-a)}), RandomLattice(Rotation::identity(1), v));
    const int n = 2048;
    CHECK(std::abs(flipped.support_fraction(n) - mirrored.support_fraction(n)) <= 2.0 / n);
  }
}

TEST_CASE("check_energy_expectation examples") {
  const TestFunction cube = TestFunction::box(centred_box(2, std::sqrt(0.125)));
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ExpectationReport r = check_energy_expectation(cube, 1000, seed);
    CHECK(r.estimate <= r.bound);
  }
  const TestFunction twice = TestFunction::combination({{2.0, cube}});
  const ExpectationReport a = check_energy_expectation(cube, 1000, 9);
  const ExpectationReport b = check_energy_expectation(twice, 1000, 9);
  CHECK(std::abs(b.estimate - 4.0 * a.estimate) <= 3.0 * std::hypot(b.std_error, 4.0 * a.std_error) + 1e-12);
  const double hat0 = std::norm(cube.evaluate_hat(Vec::Zero(2)));
  CHECK(hat0 <= 0.125 * cube.energy() * (1 + 1e-12));
}

TEST_CASE("check_tail_coeff_expectation examples") {
  const TestFunction g = TestFunction::gaussian(2, 1.0);
  const ExpectationReport none = check_tail_coeff_expectation(g, make_ball_set(Vec::Zero(2), 12.0), 200, 1);
  CHECK(none.estimate <= 1e-6 * g.energy());
  const ExpectationReport r = check_tail_coeff_expectation(g, make_ball_set(Vec::Zero(2), 2.0), 1000, 2);
  CHECK(r.estimate <= 50.0 * r.reference);
  double last = 1e9, last_err = 0.0;
  for (double radius : {1.0, 2.0, 4.0}) {
    const ExpectationReport e = check_tail_coeff_expectation(g, make_ball_set(Vec::Zero(2), radius), 1000, 3);
    CHECK(e.estimate <= last + 3.0 * std::hypot(e.std_error, last_err));
    last = e.estimate;
    last_err = e.std_error;
  }
  CHECK_THROWS_AS(check_tail_coeff_expectation(g, make_ball_set(v2(5, 5), 1.0), 10, 0), PreconditionError);
}

TEST_CASE("scaled function has the dilated transform") {
  const TestFunction f = TestFunction::translated(TestFunction::box(centred_box(2, 0.7)), v2(0.1, 0.2));
  const TestFunction g = f.scaled(2.5);
  const Vec x = v2(0.05, 0.07), xi = v2(0.4, -1.1);
  CHECK(g.evaluate(x) == f.evaluate(2.5 * x));
  CHECK(std::abs(g.evaluate_hat(xi) - f.evaluate_hat(xi / 2.5) / (2.5 * 2.5)) <= 1e-15);
  CHECK(g.energy() == doctest::Approx(f.energy() / 6.25));
}
