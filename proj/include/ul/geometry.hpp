#pragma once

// Measurable subsets of R^d built from balls and axis-aligned boxes, Haar
// rotations, and the geometric functionals |S|, w(S) and an upper bound for
// the cover measure mu(S) = inf sum_i min(r_i, r_i^d).

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ul/parallel.hpp"
#include "ul/rng.hpp"

namespace ul {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Ball {
  Vec center;
  double radius = 0.0;
};

struct AxisBox {
  Vec lower;
  Vec upper;
};

using Piece = std::variant<Ball, AxisBox>;

int piece_dimension(const Piece& piece);
bool piece_contains(const Piece& piece, const Vec& x);
double piece_volume(const Piece& piece);
// Smallest ball containing the piece (the piece itself for balls).
Ball circumscribed_ball(const Piece& piece);
double distance_to_box(const Vec& x, const AxisBox& box);

// Union of primitives. Immutable after construction.
class EuclideanSet {
 public:
  explicit EuclideanSet(int dimension, std::vector<Piece> pieces = {});

  int dimension() const { return dimension_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }

  // Closed primitives: the boundary counts as inside.
  bool contains(const Vec& x) const;

  // Radius of a centred ball containing the set.
  double bounding_radius() const;
  std::pair<Vec, Vec> bounding_box() const;

  EuclideanSet translated(const Vec& offset) const;
  EuclideanSet scaled(double factor) const;
  // Only defined for ball-only sets; boxes are not closed under rotation.
  EuclideanSet rotated(const Mat& rotation) const;
  EuclideanSet united(const EuclideanSet& other) const;

  // True when no two pieces can overlap in positive measure.
  bool pieces_disjoint() const;

 private:
  int dimension_;
  std::vector<Piece> pieces_;
};

EuclideanSet make_ball_set(const Vec& center, double radius);
EuclideanSet make_box_set(const Vec& lower, const Vec& upper);

// Orthogonal d x d matrix with determinant +1 (or +-1 for d = 1, see
// sample_rotation).
class Rotation {
 public:
  explicit Rotation(Mat matrix);
  static Rotation identity(int d);
  // Counter-clockwise rotation of the plane.
  static Rotation planar(double angle);

  const Mat& matrix() const { return matrix_; }
  int dimension() const { return static_cast<int>(matrix_.rows()); }
  Vec apply(const Vec& x) const { return matrix_ * x; }
  Vec apply_transpose(const Vec& x) const { return matrix_.transpose() * x; }
  double orthogonality_residual() const;

 private:
  Mat matrix_;
};

// Haar rotation on SO(d) for d >= 2; for d = 1 returns +1 or -1 with equal
// probability (the O(1) convention, so that one-dimensional lattice averages
// sweep the whole line).
Rotation sample_rotation(int d, Rng& rng);

// Volume of the unit ball in R^d.
double unit_ball_volume(int d);
// Surface measure of the unit sphere S^{d-1} (2 for d = 1).
double unit_sphere_area(int d);

// |set|: exact when the pieces are pairwise disjoint, otherwise uniform Monte
// Carlo in the bounding box.
Estimate lebesgue_measure(const EuclideanSet& set, std::size_t trials, std::uint64_t seed);

// Length of the projection of the set onto the line spanned by rho(e_1).
double projection_width(const EuclideanSet& set, const Rotation& rho);

// Total length of a union of closed intervals.
double union_length(std::vector<std::pair<double, double>> intervals);

// w(set): Haar average of projection_width.
Estimate mean_width(const EuclideanSet& set, std::size_t trials, std::uint64_t seed);

struct CoverCandidate {
  std::vector<Ball> balls;
  double value = 0.0;
  std::string origin;
};

double cover_value(const std::vector<Ball>& balls, int d);

struct MuOptions {
  int max_scale = 6;
  // Dyadic grids with more cubes than this are skipped.
  std::size_t max_cubes = 2'000'000;
  // Grid candidates carry their balls only when asked; mu_upper always
  // materialises the winner.
  bool materialize_grids = true;
};

// Best (smallest value) candidate among the self-cover and dyadic grid covers.
CoverCandidate mu_upper(const EuclideanSet& set, const MuOptions& options = {});
std::vector<CoverCandidate> mu_candidates(const EuclideanSet& set, const MuOptions& options = {});

// Samples points of the set and checks each lies in one of the balls.
bool covers(const CoverCandidate& cover, const EuclideanSet& set, std::size_t samples,
            std::uint64_t seed);

}  // namespace ul
