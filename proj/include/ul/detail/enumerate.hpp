#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ul::detail {

// Calls fn(k) for every integer k in the cube [lo, hi] (inclusive, per axis).
template <class F>
void for_each_in_cube(const std::vector<int>& lo, const std::vector<int>& hi, F&& fn) {
  const std::size_t d = lo.size();
  for (std::size_t i = 0; i < d; ++i)
    if (lo[i] > hi[i]) return;
  std::vector<int> k = lo;
  while (true) {
    fn(std::as_const(k));
    std::size_t axis = 0;
    while (axis < d && ++k[axis] > hi[axis]) {
      k[axis] = lo[axis];
      ++axis;
    }
    if (axis == d) return;
  }
}

// Integer points possibly inside the ball (center, radius); a superset.
template <class F>
void for_each_near_ball(const Eigen::VectorXd& center, double radius, F&& fn) {
  const auto d = static_cast<std::size_t>(center.size());
  std::vector<int> lo(d), hi(d);
  const double pad = radius * (1.0 + 1e-12) + 1e-12;
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = static_cast<int>(std::ceil(center[static_cast<Eigen::Index>(i)] - pad));
    hi[i] = static_cast<int>(std::floor(center[static_cast<Eigen::Index>(i)] + pad));
  }
  for_each_in_cube(lo, hi, fn);
}

// Integer points inside the closed ball, within the same relative slack.
template <class F>
void for_each_in_ball(const Eigen::VectorXd& center, double radius, F&& fn) {
  const double r2 = radius * radius * (1.0 + 1e-12) + 1e-24;
  const auto d = center.size();
  for_each_near_ball(center, radius, [&](const std::vector<int>& k) {
    double n2 = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double t = k[static_cast<std::size_t>(i)] - center[i];
      n2 += t * t;
    }
    if (n2 <= r2) fn(k);
  });
}

}  // namespace ul::detail
