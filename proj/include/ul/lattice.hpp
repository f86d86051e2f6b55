#pragma once

// Random lattices v * rho^T Z^d, their intersections with sets, set order,
// and Monte Carlo estimates of lattice averages.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ul/geometry.hpp"

namespace ul {

using IntVec = std::vector<int>;

// Upper constant of the lattice averaging comparison used wherever a bound
// needs a concrete number. Calibrated over annulus and Gaussian integrands in
// d = 1, 2, 3 (tests/calibrate_lal.cpp, 20000 trials); the largest observed
// two-sided ratio there is 4.25.
inline constexpr double kLatticeAveragingConstant = 5.0;

class RandomLattice {
 public:
  RandomLattice(Rotation rho, double v);
  // rho Haar, v uniform on the open interval (1, 2).
  static RandomLattice draw(int d, Rng& rng);

  const Rotation& rho() const { return rho_; }
  double v() const { return v_; }
  int dimension() const { return rho_.dimension(); }

 private:
  Rotation rho_;
  double v_;
};

// v * rho^T k.
Vec lattice_point(const RandomLattice& lattice, std::span<const int> k);

struct LatticePointSet {
  int dimension = 0;
  // Sorted lexicographically, no duplicates.
  std::vector<IntVec> indices;

  std::size_t size() const { return indices.size(); }
  bool contains(const IntVec& k) const;
};

// {k : v rho^T k in sigma}, enumerated exactly.
LatticePointSet intersect(const RandomLattice& lattice, const EuclideanSet& sigma);
// Same set, computed by testing every k in the cube |k|_inf <= bounding_radius / v.
LatticePointSet intersect_brute_force(const RandomLattice& lattice, const EuclideanSet& sigma);

// Number of distinct values of each coordinate over the index vectors.
std::vector<int> axis_counts(const LatticePointSet& m);
// Sum of axis_counts; 0 for the empty set.
int order_of(const LatticePointSet& m);

// Number of k != 0 such that some (k, k') lies in sigma's lattice points.
int m_function(const RandomLattice& lattice, const EuclideanSet& sigma, int k_range);

struct ExpectationReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  // Right-hand side without the unspecified constant, and with
  // kLatticeAveragingConstant applied.
  double reference = 0.0;
  double bound = 0.0;
  std::uint64_t seed = 0;
  double wall_time_ms = 0.0;
  std::vector<std::pair<std::string, double>> extras;

  double ratio() const { return reference > 0.0 ? estimate / reference : 0.0; }
};

// C(d) in the polar identity; 1 / |S^{d-1}| (1/2 for d = 1 with rho = +-1).
double polar_constant(int d);

// phi(x) <= bound(|x|) for every x, bound nonincreasing; phi = 0 beyond
// support_radius.
struct RadialMajorant {
  double support_radius = std::numeric_limits<double>::infinity();
  std::function<double(double)> bound;

  bool compact() const { return std::isfinite(support_radius); }
};

// Nonnegative integrand for the lattice averaging estimates.
class LalIntegrand {
 public:
  using Value = std::function<double(const Vec&)>;
  // Integral of phi over {|x| >= radius}.
  using OuterIntegral = std::function<Estimate(double radius)>;

  LalIntegrand(int dimension, std::string name, Value value, RadialMajorant envelope,
               OuterIntegral outer_integral);

  int dimension() const { return dimension_; }
  const std::string& name() const { return name_; }
  double operator()(const Vec& x) const { return value_(x); }
  const RadialMajorant& envelope() const { return envelope_; }
  Estimate outer_integral(double radius) const { return outer_(radius); }

 private:
  int dimension_;
  std::string name_;
  Value value_;
  RadialMajorant envelope_;
  OuterIntegral outer_;
};

LalIntegrand annulus_indicator(int d, double inner, double outer);
LalIntegrand set_indicator(const EuclideanSet& set, std::size_t reference_trials,
                           std::uint64_t reference_seed);

// sum_{k != 0} phi(scale * rho k), truncated where the envelope tail drops
// below rel_tail of the running sum.
double lattice_sum(const LalIntegrand& phi, const Rotation& rho, double scale,
                   double rel_tail = 1e-6);

struct LalReports {
  // E sum phi(v rho k) against int_{|x| >= 1} phi.
  ExpectationReport dilated;
  // E sum phi(rho k / v) against int_{|x| >= 1/2} phi.
  ExpectationReport contracted;
};

LalReports verify_lal(const LalIntegrand& phi, std::size_t trials, std::uint64_t seed);

// E[card M - 1]; requires 0 in sigma.
ExpectationReport estimate_card(const EuclideanSet& sigma, std::size_t trials, std::uint64_t seed);

struct OrderOptions {
  std::size_t width_trials = 4000;
  MuOptions mu;
};

// E[ord M - d] with mu_upper and mean width as reference scales.
ExpectationReport estimate_order(const EuclideanSet& sigma, std::size_t trials, std::uint64_t seed,
                                 const OrderOptions& options = {});

// E[m_function] over random lattices.
ExpectationReport estimate_m(const EuclideanSet& sigma, std::size_t trials, std::uint64_t seed);

}  // namespace ul
