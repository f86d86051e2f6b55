#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ul/annihilation.hpp"
#include "ul/errors.hpp"

using namespace ul;

namespace {

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

// Box of measure 2^{-d-1} centred at 0, with S its own support.
AnnihilationInstance box_instance(int d, double sigma_radius) {
  const double half = 0.5 * std::pow(std::pow(2.0, -d - 1), 1.0 / d);
  const AxisBox box{Vec::Constant(d, -half), Vec::Constant(d, half)};
  return {TestFunction::box(box), EuclideanSet(d, {box}), make_ball_set(Vec::Zero(d), sigma_radius)};
}

}  // namespace

TEST_CASE("theorem_bound on balls picks a mixed term") {
  for (double r : {1.0, 2.0}) {
    const EuclideanSet ball = make_ball_set(Vec::Zero(2), r);
    const TheoremBound b = theorem_bound(ball, ball, 0.5);
    CHECK(b.terms[0] == doctest::Approx(oracle::pi * oracle::pi * std::pow(r, 4)));
    CHECK(b.terms[1] == doctest::Approx(std::sqrt(oracle::pi * r * r) * 2 * r));
    CHECK(b.argmin != 0);
    CHECK(b.exponent == doctest::Approx(0.5 * b.terms[1]));
    CHECK(b.value == doctest::Approx(0.5 * std::exp(b.exponent)));
  }
}

TEST_CASE("theorem_bound tends to C as S shrinks") {
  const EuclideanSet sigma = make_ball_set(Vec::Zero(2), 3.0);
  const TheoremBound b = theorem_bound(make_ball_set(Vec::Zero(2), 1e-6), sigma, 2.0);
  CHECK(b.value == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("theorem_bound under (lambda S, Sigma / lambda)") {
  const EuclideanSet s = make_box_set(v2(-0.5, -0.5), v2(0.5, 1.0));
  const EuclideanSet sigma = make_ball_set(v2(0.2, 0), 1.5);
  const TheoremBound base = theorem_bound(s, sigma, 1.0);
  for (double lambda : {2.0, 4.0}) {
    const TheoremBound b = theorem_bound(s.scaled(lambda), sigma.scaled(1 / lambda), 1.0);
    CHECK(b.terms[0] == doctest::Approx(base.terms[0]).epsilon(1e-12));
    CHECK(b.exponent <= b.terms[0] + 1e-12);
  }
}

TEST_CASE("theorem_bound preconditions") {
  const EuclideanSet ball = make_ball_set(Vec::Zero(2), 1.0);
  CHECK_THROWS_AS(theorem_bound(ball, ball, 0.0), PreconditionError);
  CHECK_THROWS_AS(theorem_bound(EuclideanSet(2), ball, 1.0), PreconditionError);
  CHECK_THROWS_AS(theorem_bound(ball, make_ball_set(Vec::Zero(3), 1.0), 1.0), PreconditionError);
}

TEST_CASE("observed_ratio reports an annihilated instance as infinite") {
  const EuclideanSet huge = make_ball_set(Vec::Zero(1), 40.0);
  const ObservedRatio r = observed_ratio({TestFunction::gaussian(1, 1.0), huge, huge});
  CHECK(r.annihilated);
  CHECK(std::isinf(r.ratio));
}

TEST_CASE("Gaussian ratio grows like exp(c R^2)") {
  std::vector<double> r2, lr;
  for (int i = 0; i < 8; ++i) {
    const double r = 0.6 + 0.2 * i;
    const EuclideanSet ball = make_ball_set(Vec::Zero(1), r);
    const ObservedRatio o = observed_ratio({TestFunction::gaussian(1, 1.0), ball, ball});
    r2.push_back(r * r);
    lr.push_back(std::log(o.ratio));
  }
  const oracle::Fit fit = oracle::linear_fit(r2, lr);
  CHECK(fit.slope > 0.0);
  CHECK(fit.r2 >= 0.99);
}

TEST_CASE("Gaussian ratio matches a quadrature oracle") {
  const EuclideanSet ball = make_ball_set(Vec::Zero(1), 1.0);
  const ObservedRatio o = observed_ratio({TestFunction::gaussian(1, 1.0), ball, ball});
  const double truth = (1 / std::sqrt(2.0)) / (2 * oracle::gaussian_tail_1d(1.0));
  CHECK(o.ratio == doctest::Approx(truth).epsilon(0.01));
}

TEST_CASE("observed_ratio is invariant under translation and modulation") {
  for (int d : {1, 2}) {
    const TestFunction g = TestFunction::gaussian(d, 0.9);
    const EuclideanSet s = make_ball_set(Vec::Zero(d), 0.8);
    const EuclideanSet sigma = make_ball_set(Vec::Zero(d), 0.7);
    const double base = observed_ratio({g, s, sigma}).ratio;
    const Vec x0 = Vec::LinSpaced(d, 0.3, 1.1);
    const Vec y = Vec::LinSpaced(d, -0.6, 0.4);
    const TestFunction moved = TestFunction::translated(TestFunction::modulated(g, y), x0);
    const double r = observed_ratio({moved, s.translated(x0), sigma.translated(-y)}).ratio;
    CHECK(std::abs(r - base) <= 1e-9 * base);
  }
}

TEST_CASE("scaling_reduction brings |S| to 2^{-d-1}") {
  const AxisBox box{v2(-0.5, -0.5), v2(0.5, 0.5)};
  const AnnihilationInstance inst{TestFunction::box(box), EuclideanSet(2, {box}), make_ball_set(Vec::Zero(2), 1.0)};
  const AnnihilationInstance red = scaling_reduction(inst);
  CHECK(red.scale == doctest::Approx(std::sqrt(8.0)));
  CHECK(lebesgue_measure(red.s, 10, 0).value == doctest::Approx(0.125));
  CHECK(lebesgue_measure(red.sigma, 10, 0).value == doctest::Approx(8 * oracle::pi));
  const AnnihilationInstance same = scaling_reduction(box_instance(2, 2.0));
  CHECK(same.scale == 1.0);
}

TEST_CASE("pipeline preconditions") {
  AnnihilationInstance inst = box_instance(2, 2.0);
  inst.sigma = make_ball_set(v2(5, 5), 1.0);
  CHECK_THROWS_AS(pipeline_trace(inst, 0), PreconditionError);
  AnnihilationInstance gauss = box_instance(2, 2.0);
  gauss.f = TestFunction::gaussian(2, 0.1);
  CHECK_THROWS_AS(pipeline_trace(gauss, 0), PreconditionError);
  AnnihilationInstance outside = box_instance(2, 2.0);
  outside.s = make_box_set(v2(0, 0), v2(1, 1));
  CHECK_THROWS_AS(pipeline_trace(outside, 0), PreconditionError);
}

TEST_CASE("pipeline traces on the box instance") {
  const PipelineContext ctx = prepare_pipeline(box_instance(2, 2.0));
  int all = 0;
  const int seeds = 40;
  for (int seed = 0; seed < seeds; ++seed) {
    const PipelineTrace t = trace_pipeline(ctx, static_cast<std::uint64_t>(seed));
    CHECK(t.e4);
    CHECK(t.partition_gap <= 1e-9);
    CHECK(t.hat0_sq <= t.p_hat0_sq);
    CHECK(t.e_tilde_measure <= t.e_measure);
    CHECK(t.m.contains(IntVec{0, 0}));
    CHECK(t.fm_exponent == t.order - 2);
    // Event flags follow from the trace's own numbers.
    CHECK(t.e1 == (t.r_energy <= 4 * ctx.options.lal_constant * t.tail));
    CHECK(t.e3 == (t.e_measure >= 0.5));
    if (t.all_events()) {
      ++all;
      CHECK(t.chain_holds);
    }
  }
  CHECK(all >= seeds / 20);
}

TEST_CASE("pipeline on the same seed is reproducible") {
  const AnnihilationInstance inst = box_instance(2, 2.0);
  const PipelineTrace a = pipeline_trace(inst, 17);
  const PipelineTrace b = pipeline_trace(inst, 17);
  CHECK(a.chain_value == b.chain_value);
  CHECK(a.e_measure == b.e_measure);
  CHECK(a.p_coefficients == b.p_coefficients);
}

TEST_CASE("tail-free frequency set makes e1 hold on every seed") {
  const PipelineContext ctx = prepare_pipeline(box_instance(1, 400.0));
  CHECK(ctx.tail <= 2e-3 * ctx.energy);
  for (int seed = 0; seed < 10; ++seed) CHECK(trace_pipeline(ctx, static_cast<std::uint64_t>(seed)).e1);
}

TEST_CASE("sweep at y = 0 reproduces the plain trace") {
  const AnnihilationInstance inst = box_instance(2, 2.0);
  SweepOptions o;
  o.grid_per_axis = 3;
  const SweepResult r = translated_sweep(inst, 5, o);
  const SweepPoint* zero = nullptr;
  for (const auto& p : r.points)
    if (p.y.norm() == 0.0) zero = &p;
  REQUIRE(zero != nullptr);
  const PipelineTrace t = pipeline_trace(inst, zero->seed);
  CHECK(t.all_events());
  CHECK(zero->bound == t.chain_value);
  CHECK(zero->direct == t.hat0_sq);
  CHECK(r.aggregate >= r.direct_integral);
}

TEST_CASE("sweep bounds are symmetric under y -> -y") {
  const AnnihilationInstance inst = box_instance(2, 2.0);
  for (const Vec& y : {v2(0.8, 0.0), v2(0.5, -0.6)}) {
    auto log_chain = [&](const Vec& shift) {
      const AnnihilationInstance moved{TestFunction::modulated(inst.f, shift), inst.s, inst.sigma.translated(-shift)};
      const PipelineContext ctx = prepare_pipeline(moved);
      std::vector<double> values;
      for (int seed = 0; seed < 40; ++seed)
        values.push_back(std::log(trace_pipeline(ctx, 1000 + static_cast<std::uint64_t>(seed)).chain_value));
      return mean_and_stderr(values);
    };
    const Estimate plus = log_chain(y), minus = log_chain(-y);
    CHECK(std::abs(plus.value - minus.value) <= 3 * std::hypot(plus.std_error, minus.std_error) + 1e-12);
  }
}

TEST_CASE("sweep aggregate bounds the direct integral on several seeds") {
  const AnnihilationInstance inst = box_instance(2, 2.0);
  SweepOptions o;
  o.grid_per_axis = 3;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SweepResult r = translated_sweep(inst, seed, o);
    CHECK(r.aggregate >= r.direct_integral);
  }
}

TEST_CASE("Sigma_N geometry") {
  for (int n : {1, 8, 16}) {
    const EuclideanSet set = sigma_n(n, 10.0 * n);
    CHECK(lebesgue_measure(set, 10, 0).value == doctest::Approx(n * oracle::pi / 4));
    CHECK(mu_upper(set).value <= n / 4.0 + 1e-12);
  }
  CHECK_THROWS_AS(sigma_n_experiment(8, 16.0, 100, 0), PreconditionError);
}

TEST_CASE("Sigma_N experiment examples") {
  const SharpnessReport one = sigma_n_experiment(1, 10.0, 2000, 1);
  CHECK(one.m.estimate >= 0.0);
  CHECK(one.m.estimate <= one.card.estimate);
  std::vector<double> m;
  for (int n : {8, 16, 32}) m.push_back(sigma_n_experiment(n, 10.0 * n, 2000, 3).m.estimate);
  for (int i = 0; i < 2; ++i) {
    CHECK(m[i + 1] / m[i] >= 1.5);
    CHECK(m[i + 1] / m[i] <= 2.5);
  }
  CHECK(m[1] >= 16.0 / 8);
}
