#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ul/annihilation.hpp"
#include "ul/errors.hpp"
#include "ul/geometry.hpp"

using namespace ul;

namespace {

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_CASE("contains on balls and box unions") {
  const EuclideanSet ball = make_ball_set(Vec::Zero(3), 1.0);
  CHECK(ball.contains(Vec::Zero(3)));
  Vec far = Vec::Zero(3);
  far[0] = 2.0;
  CHECK_FALSE(ball.contains(far));
  const EuclideanSet boxes(3, {AxisBox{Vec::Zero(3), Vec::Ones(3)}, AxisBox{Vec::Constant(3, 3.0), Vec::Constant(3, 4.0)}});
  CHECK(boxes.contains(Vec::Constant(3, 3.5)));
  CHECK_FALSE(boxes.contains(Vec::Constant(3, 2.0)));
  CHECK(ball.contains(Vec::Unit(3, 1)));  // boundary counts
  CHECK_THROWS_AS(ball.contains(Vec::Zero(2)), PreconditionError);
}

TEST_CASE("construction rejects bad primitives") {
  CHECK_THROWS_AS(EuclideanSet(2, {Ball{Vec::Zero(2), 0.0}}), PreconditionError);
  CHECK_THROWS_AS(EuclideanSet(2, {AxisBox{Vec::Ones(2), Vec::Zero(2)}}), PreconditionError);
  CHECK_THROWS_AS(EuclideanSet(2, {Ball{Vec::Zero(3), 1.0}}), PreconditionError);
  CHECK_THROWS_AS(EuclideanSet(0), PreconditionError);
}

TEST_CASE("lebesgue_measure fast path and overlap") {
  const Estimate disc = lebesgue_measure(make_ball_set(Vec::Zero(2), 1.0), 1000, 1);
  CHECK(disc.exact);
  CHECK(disc.value == doctest::Approx(oracle::pi).epsilon(1e-15));
  for (int d = 1; d <= 4; ++d) {
    const Estimate cube = lebesgue_measure(make_box_set(Vec::Zero(d), Vec::Ones(d)), 1000, 1);
    CHECK(cube.exact);
    CHECK(cube.value == 1.0);
  }
  const EuclideanSet lens(2, {Ball{v2(0, 0), 1.0}, Ball{v2(1, 0), 1.0}});
  const Estimate e = lebesgue_measure(lens, 400000, 11);
  CHECK_FALSE(e.exact);
  const double truth = oracle::two_disc_union_area(1.0, 1.0);
  CHECK(truth == doctest::Approx(2 * oracle::pi - 2 * std::acos(0.5) + std::sqrt(3.0) / 2).epsilon(1e-14));
  CHECK(std::abs(e.value - truth) <= 3.0 * e.std_error);
  CHECK(lebesgue_measure(EuclideanSet(2), 10, 0).value == 0.0);
  CHECK_THROWS_AS(lebesgue_measure(lens, 0, 0), PreconditionError);
}

TEST_CASE("lebesgue_measure is monotone under piece inclusion") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<Piece> pieces;
    for (int i = 0; i < 3; ++i) pieces.push_back(Ball{v2(uniform(rng, -1, 1), uniform(rng, -1, 1)), uniform(rng, 0.3, 1.0)});
    const EuclideanSet small(2, pieces);
    pieces.push_back(AxisBox{v2(-0.5, -0.5), v2(1.5, 0.2)});
    const EuclideanSet big(2, pieces);
    const Estimate a = lebesgue_measure(small, 100000, seed);
    const Estimate b = lebesgue_measure(big, 100000, seed + 100);
    CHECK(a.value <= b.value + 3.0 * std::hypot(a.std_error, b.std_error));
  }
}

TEST_CASE("sample_rotation in d = 1 is +-1 with equal odds") {
  Rng rng(2024);
  int plus = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Rotation r = sample_rotation(1, rng);
    CHECK(std::abs(r.matrix()(0, 0)) == 1.0);
    plus += r.matrix()(0, 0) > 0;
  }
  CHECK(std::abs(plus / double(n) - 0.5) <= 0.02);
}

TEST_CASE("sample_rotation in d = 2 has a uniform angle") {
  Rng rng(77);
  std::vector<double> u;
  for (int i = 0; i < 10000; ++i) {
    const Rotation r = sample_rotation(2, rng);
    double angle = std::atan2(r.matrix()(1, 0), r.matrix()(0, 0));
    if (angle < 0) angle += 2 * oracle::pi;
    u.push_back(angle / (2 * oracle::pi));
  }
  CHECK(oracle::ks_uniform(u) < oracle::ks_critical_1pct(u.size()));
}

TEST_CASE("sample_rotation is orthogonal with determinant one") {
  Rng rng(5);
  for (int d = 1; d <= 6; ++d)
    for (int i = 0; i < 200; ++i) {
      const Rotation r = sample_rotation(d, rng);
      CHECK(r.orthogonality_residual() <= 1e-12);
      if (d >= 2) CHECK(std::abs(r.matrix().determinant() - 1.0) <= 1e-12);
    }
}

TEST_CASE("projection_width examples") {
  Rng rng(3);
  const EuclideanSet ball = make_ball_set(v2(0.3, -2), 1.0);
  for (int i = 0; i < 20; ++i) CHECK(projection_width(ball, sample_rotation(2, rng)) == doctest::Approx(2.0));
  const EuclideanSet two(1, {AxisBox{Vec::Zero(1), Vec::Ones(1)}, AxisBox{Vec::Constant(1, 3.0), Vec::Constant(1, 4.0)}});
  CHECK(projection_width(two, Rotation::identity(1)) == doctest::Approx(2.0));
  const EuclideanSet square = make_box_set(v2(0, 0), v2(1, 1));
  CHECK(projection_width(square, Rotation::planar(oracle::pi / 4)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("projection_width never exceeds the bounding diameter") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    std::vector<Piece> pieces;
    for (int i = 0; i < 3; ++i) {
      Vec c = Vec::NullaryExpr(d, [&](Eigen::Index) { return uniform(rng, -3, 3); });
      if (i % 2) pieces.push_back(Ball{c, uniform(rng, 0.1, 2)});
      else pieces.push_back(AxisBox{c, c + Vec::Constant(d, uniform(rng, 0.1, 2))});
    }
    const EuclideanSet set(d, pieces);
    CHECK(projection_width(set, sample_rotation(d, rng)) <= 2.0 * set.bounding_radius() + 1e-12);
  }
}

TEST_CASE("mean_width of balls") {
  const Estimate unit = mean_width(make_ball_set(Vec::Zero(2), 1.0), 1000, 0);
  CHECK(unit.value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(unit.std_error == doctest::Approx(0.0));
  const Estimate big = mean_width(make_ball_set(Vec::Zero(3), 4.5), 100, 0);
  CHECK(big.value == doctest::Approx(9.0).epsilon(1e-14));
  CHECK_THROWS_AS(mean_width(make_ball_set(Vec::Zero(2), 1.0), 1, 0), PreconditionError);
}

TEST_CASE("mean_width of Sigma_16 matches an equispaced direction average") {
  const EuclideanSet set = sigma_n(16, 100.0);
  const int directions = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < directions; ++i)
    sum += projection_width(set, Rotation::planar(2 * oracle::pi * (i + 0.5) / directions));
  const double truth = sum / directions;
  const Estimate e = mean_width(set, 20000, 4);
  CHECK(std::abs(e.value - truth) <= 3.0 * e.std_error);
}

TEST_CASE("mean_width is rotation invariant") {
  const EuclideanSet set(2, {Ball{v2(0, 0), 1.0}, Ball{v2(4, 1), 0.5}, Ball{v2(-2, 3), 0.7}});
  const Mat rot = Rotation::planar(1.1).matrix();
  const Estimate a = mean_width(set, 20000, 1);
  const Estimate b = mean_width(set.rotated(rot), 20000, 2);
  CHECK(std::abs(a.value - b.value) <= 3.0 * std::hypot(a.std_error, b.std_error));
}

TEST_CASE("mu_upper examples") {
  CHECK(mu_upper(make_ball_set(Vec::Zero(2), 0.5)).value <= 0.25 + 1e-15);
  CHECK(mu_upper(make_ball_set(Vec::Zero(2), 3.0)).value <= 3.0 + 1e-15);
  for (int n : {4, 8, 16}) {
    const EuclideanSet set = sigma_n(n, 10.0 * n);
    const CoverCandidate c = mu_upper(set);
    CHECK(c.value <= n / 4.0 + 1e-12);
    CHECK(covers(c, set, 20000, 9));
  }
}

TEST_CASE("mu_upper never exceeds the self cover and its cover is valid") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Piece> pieces;
    std::vector<Ball> self;
    for (int i = 0; i < 3; ++i) {
      const Vec c = v2(uniform(rng, -2, 2), uniform(rng, -2, 2));
      if (i == 2) {
        const AxisBox box{c, c + v2(uniform(rng, 0.1, 1), uniform(rng, 0.1, 1))};
        pieces.push_back(box);
        self.push_back(circumscribed_ball(box));
      } else {
        pieces.push_back(Ball{c, uniform(rng, 0.1, 1.5)});
        self.push_back(std::get<Ball>(pieces.back()));
      }
    }
    const EuclideanSet set(2, pieces);
    const CoverCandidate best = mu_upper(set);
    CHECK(best.value <= cover_value(self, 2) + 1e-12);
    CHECK(covers(best, set, 5000, trial));
    MuOptions coarse;
    coarse.max_scale = 1;
    CHECK(best.value <= mu_upper(set, coarse).value + 1e-12);
  }
}
