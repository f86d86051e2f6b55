#include "ul/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ul/errors.hpp"

namespace ul {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool boxes_separated(const AxisBox& a, const AxisBox& b) {
  for (Eigen::Index i = 0; i < a.lower.size(); ++i) {
    if (a.upper[i] <= b.lower[i] || b.upper[i] <= a.lower[i]) return true;
  }
  return false;
}

bool pieces_separated(const Piece& a, const Piece& b) {
  return std::visit(
      overloaded{
          [](const Ball& p, const Ball& q) {
            return (p.center - q.center).norm() > p.radius + q.radius;
          },
          [](const Ball& p, const AxisBox& q) { return distance_to_box(p.center, q) > p.radius; },
          [](const AxisBox& p, const Ball& q) { return distance_to_box(q.center, p) > q.radius; },
          [](const AxisBox& p, const AxisBox& q) { return boxes_separated(p, q); },
      },
      a, b);
}

std::pair<Vec, Vec> piece_bounds(const Piece& piece) {
  return std::visit(overloaded{
                        [](const Ball& b) {
                          const Vec r = Vec::Constant(b.center.size(), b.radius);
                          return std::pair<Vec, Vec>{b.center - r, b.center + r};
                        },
                        [](const AxisBox& b) { return std::pair<Vec, Vec>{b.lower, b.upper}; },
                    },
                    piece);
}

bool cube_meets_piece(const AxisBox& cube, const Piece& piece) {
  return std::visit(overloaded{
                        [&](const Ball& b) { return distance_to_box(b.center, cube) <= b.radius; },
                        [&](const AxisBox& b) {
                          for (Eigen::Index i = 0; i < b.lower.size(); ++i) {
                            if (cube.upper[i] < b.lower[i] || b.upper[i] < cube.lower[i]) return false;
                          }
                          return true;
                        },
                    },
                    piece);
}

}  // namespace

int piece_dimension(const Piece& piece) {
  return std::visit(overloaded{
                        [](const Ball& b) { return static_cast<int>(b.center.size()); },
                        [](const AxisBox& b) { return static_cast<int>(b.lower.size()); },
                    },
                    piece);
}

bool piece_contains(const Piece& piece, const Vec& x) {
  return std::visit(overloaded{
                        [&](const Ball& b) {
                          return (x - b.center).squaredNorm() <= b.radius * b.radius;
                        },
                        [&](const AxisBox& b) {
                          return (x.array() >= b.lower.array()).all() &&
                                 (x.array() <= b.upper.array()).all();
                        },
                    },
                    piece);
}

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double unit_sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

double piece_volume(const Piece& piece) {
  return std::visit(overloaded{
                        [](const Ball& b) {
                          const int d = static_cast<int>(b.center.size());
                          return unit_ball_volume(d) * std::pow(b.radius, d);
                        },
                        [](const AxisBox& b) { return (b.upper - b.lower).prod(); },
                    },
                    piece);
}

Ball circumscribed_ball(const Piece& piece) {
  return std::visit(overloaded{
                        [](const Ball& b) { return b; },
                        [](const AxisBox& b) {
                          return Ball{0.5 * (b.lower + b.upper), 0.5 * (b.upper - b.lower).norm()};
                        },
                    },
                    piece);
}

double distance_to_box(const Vec& x, const AxisBox& box) {
  const Vec clamped = x.cwiseMax(box.lower).cwiseMin(box.upper);
  return (x - clamped).norm();
}

EuclideanSet::EuclideanSet(int dimension, std::vector<Piece> pieces)
    : dimension_(dimension), pieces_(std::move(pieces)) {
  require(dimension_ >= 1, "EuclideanSet: dimension must be >= 1");
  for (const auto& piece : pieces_) {
    require(piece_dimension(piece) == dimension_, "EuclideanSet: piece dimension mismatch");
    std::visit(overloaded{
                   [](const Ball& b) {
                     require(b.radius > 0.0 && std::isfinite(b.radius),
                             "EuclideanSet: ball radius must be positive");
                   },
                   [](const AxisBox& b) {
                     require((b.lower.array() < b.upper.array()).all(),
                             "EuclideanSet: box corners must satisfy lower < upper");
                   },
               },
               piece);
  }
}

bool EuclideanSet::contains(const Vec& x) const {
  require(x.size() == dimension_, "contains: point dimension mismatch");
  return std::any_of(pieces_.begin(), pieces_.end(),
                     [&](const Piece& p) { return piece_contains(p, x); });
}

double EuclideanSet::bounding_radius() const {
  double r = 0.0;
  for (const auto& piece : pieces_) {
    r = std::max(r, std::visit(overloaded{
                                   [](const Ball& b) { return b.center.norm() + b.radius; },
                                   [](const AxisBox& b) {
                                     return b.lower.cwiseAbs().cwiseMax(b.upper.cwiseAbs()).norm();
                                   },
                               },
                               piece));
  }
  return r;
}

std::pair<Vec, Vec> EuclideanSet::bounding_box() const {
  require(!pieces_.empty(), "bounding_box: empty set");
  auto [lo, hi] = piece_bounds(pieces_.front());
  for (std::size_t i = 1; i < pieces_.size(); ++i) {
    const auto [l, h] = piece_bounds(pieces_[i]);
    lo = lo.cwiseMin(l);
    hi = hi.cwiseMax(h);
  }
  return {lo, hi};
}

EuclideanSet EuclideanSet::translated(const Vec& offset) const {
  require(offset.size() == dimension_, "translated: dimension mismatch");
  std::vector<Piece> out;
  out.reserve(pieces_.size());
  for (const auto& piece : pieces_) {
    out.push_back(std::visit(overloaded{
                                 [&](const Ball& b) -> Piece { return Ball{b.center + offset, b.radius}; },
                                 [&](const AxisBox& b) -> Piece {
                                   return AxisBox{b.lower + offset, b.upper + offset};
                                 },
                             },
                             piece));
  }
  return EuclideanSet(dimension_, std::move(out));
}

EuclideanSet EuclideanSet::scaled(double factor) const {
  require(factor > 0.0, "scaled: factor must be positive");
  std::vector<Piece> out;
  out.reserve(pieces_.size());
  for (const auto& piece : pieces_) {
    out.push_back(std::visit(overloaded{
                                 [&](const Ball& b) -> Piece {
                                   return Ball{factor * b.center, factor * b.radius};
                                 },
                                 [&](const AxisBox& b) -> Piece {
                                   return AxisBox{factor * b.lower, factor * b.upper};
                                 },
                             },
                             piece));
  }
  return EuclideanSet(dimension_, std::move(out));
}

EuclideanSet EuclideanSet::rotated(const Mat& rotation) const {
  std::vector<Piece> out;
  out.reserve(pieces_.size());
  for (const auto& piece : pieces_) {
    const auto* ball = std::get_if<Ball>(&piece);
    require(ball != nullptr, "rotated: only ball pieces can be rotated");
    out.push_back(Ball{rotation * ball->center, ball->radius});
  }
  return EuclideanSet(dimension_, std::move(out));
}

EuclideanSet EuclideanSet::united(const EuclideanSet& other) const {
  require(other.dimension_ == dimension_, "united: dimension mismatch");
  std::vector<Piece> out = pieces_;
  out.insert(out.end(), other.pieces_.begin(), other.pieces_.end());
  return EuclideanSet(dimension_, std::move(out));
}

bool EuclideanSet::pieces_disjoint() const {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    for (std::size_t j = i + 1; j < pieces_.size(); ++j) {
      if (!pieces_separated(pieces_[i], pieces_[j])) return false;
    }
  }
  return true;
}

EuclideanSet make_ball_set(const Vec& center, double radius) {
  return EuclideanSet(static_cast<int>(center.size()), {Ball{center, radius}});
}

EuclideanSet make_box_set(const Vec& lower, const Vec& upper) {
  return EuclideanSet(static_cast<int>(lower.size()), {AxisBox{lower, upper}});
}

Rotation::Rotation(Mat matrix) : matrix_(std::move(matrix)) {
  require(matrix_.rows() == matrix_.cols() && matrix_.rows() >= 1, "Rotation: matrix must be square");
  require(orthogonality_residual() <= 1e-12, "Rotation: matrix is not orthogonal");
  const double det = matrix_.determinant();
  if (matrix_.rows() >= 2) {
    require(std::abs(det - 1.0) <= 1e-12, "Rotation: determinant must be +1");
  }
}

Rotation Rotation::identity(int d) { return Rotation(Mat::Identity(d, d)); }

Rotation Rotation::planar(double angle) {
  Mat m(2, 2);
  m << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return Rotation(std::move(m));
}

double Rotation::orthogonality_residual() const {
  const auto n = matrix_.rows();
  return (matrix_.transpose() * matrix_ - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
}

Rotation sample_rotation(int d, Rng& rng) {
  require(d >= 1, "sample_rotation: d must be >= 1");
  if (d == 1) {
    Mat m(1, 1);
    m(0, 0) = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
    return Rotation(std::move(m));
  }
  std::normal_distribution<double> normal;
  Mat g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign normalisation makes Q exactly Haar on O(d).
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  if (q.determinant() < 0.0) q.col(0) = -q.col(0);
  return Rotation(std::move(q));
}

Estimate lebesgue_measure(const EuclideanSet& set, std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, "lebesgue_measure: trials must be >= 1");
  Estimate out;
  if (set.empty()) {
    out.exact = true;
    return out;
  }
  if (set.pieces_disjoint()) {
    for (const auto& piece : set.pieces()) out.value += piece_volume(piece);
    out.exact = true;
    return out;
  }
  const auto [lo, hi] = set.bounding_box();
  const double box_volume = (hi - lo).prod();
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (trials + kBlock - 1) / kBlock;
  const int d = set.dimension();
  const auto hits = evaluate_trials(blocks, [&](std::size_t b) {
    Rng rng = make_stream(seed, b);
    const std::size_t n = std::min(kBlock, trials - b * kBlock);
    Vec x(d);
    std::size_t count = 0;
    for (std::size_t s = 0; s < n; ++s) {
      for (int i = 0; i < d; ++i) x[i] = uniform(rng, lo[i], hi[i]);
      if (set.contains(x)) ++count;
    }
    return static_cast<double>(count);
  });
  const double n = static_cast<double>(trials);
  const double p = pairwise_sum(hits) / n;
  out.value = box_volume * p;
  out.trials = trials;
  out.std_error = trials > 1 ? box_volume * std::sqrt(p * (1.0 - p) / (n - 1.0)) : 0.0;
  return out;
}

double union_length(std::vector<std::pair<double, double>> intervals) {
  if (intervals.empty()) return 0.0;
  std::sort(intervals.begin(), intervals.end());
  double total = 0.0;
  double lo = intervals.front().first;
  double hi = intervals.front().second;
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    if (intervals[i].first > hi) {
      total += hi - lo;
      lo = intervals[i].first;
      hi = intervals[i].second;
    } else {
      hi = std::max(hi, intervals[i].second);
    }
  }
  return total + (hi - lo);
}

double projection_width(const EuclideanSet& set, const Rotation& rho) {
  require(rho.dimension() == set.dimension(), "projection_width: dimension mismatch");
  require(!set.empty(), "projection_width: empty set");
  const Vec u = rho.matrix().col(0);
  std::vector<std::pair<double, double>> intervals;
  intervals.reserve(set.pieces().size());
  for (const auto& piece : set.pieces()) {
    intervals.push_back(std::visit(
        overloaded{
            [&](const Ball& b) {
              const double c = b.center.dot(u);
              return std::pair<double, double>{c - b.radius, c + b.radius};
            },
            [&](const AxisBox& b) {
              // Support values of the box in direction u.
              const Vec a = b.lower.cwiseProduct(u);
              const Vec c = b.upper.cwiseProduct(u);
              return std::pair<double, double>{a.cwiseMin(c).sum(), a.cwiseMax(c).sum()};
            },
        },
        piece));
  }
  return union_length(std::move(intervals));
}

Estimate mean_width(const EuclideanSet& set, std::size_t trials, std::uint64_t seed) {
  require(trials >= 2, "mean_width: trials must be >= 2");
  require(!set.empty(), "mean_width: empty set");
  const int d = set.dimension();
  const auto widths = evaluate_trials(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    return projection_width(set, sample_rotation(d, rng));
  });
  return mean_and_stderr(widths);
}

double cover_value(const std::vector<Ball>& balls, int d) {
  double value = 0.0;
  for (const auto& b : balls) value += std::min(b.radius, std::pow(b.radius, d));
  return value;
}

namespace {

struct GridCover {
  int scale = 0;
  std::vector<std::vector<long long>> cubes;
};

// Cubes [i s, (i+1) s]^d meeting the set; nullopt-like empty flag when too many.
bool dyadic_cubes(const EuclideanSet& set, int scale, std::size_t max_cubes, GridCover& out) {
  const int d = set.dimension();
  const double s = std::ldexp(1.0, -scale);
  std::size_t budget = 0;
  std::vector<std::pair<std::vector<long long>, std::vector<long long>>> ranges;
  for (const auto& piece : set.pieces()) {
    const auto [lo, hi] = piece_bounds(piece);
    std::vector<long long> a(d), b(d);
    double count = 1.0;
    for (int i = 0; i < d; ++i) {
      a[i] = static_cast<long long>(std::floor(lo[i] / s));
      b[i] = static_cast<long long>(std::floor(hi[i] / s));
      count *= static_cast<double>(b[i] - a[i] + 1);
    }
    if (count > static_cast<double>(max_cubes)) return false;
    budget += static_cast<std::size_t>(count);
    if (budget > max_cubes) return false;
    ranges.emplace_back(std::move(a), std::move(b));
  }
  out.scale = scale;
  out.cubes.clear();
  AxisBox cube{Vec(d), Vec(d)};
  for (std::size_t p = 0; p < ranges.size(); ++p) {
    const auto& [a, b] = ranges[p];
    std::vector<long long> idx = a;
    while (true) {
      for (int i = 0; i < d; ++i) {
        cube.lower[i] = static_cast<double>(idx[i]) * s;
        cube.upper[i] = cube.lower[i] + s;
      }
      if (cube_meets_piece(cube, set.pieces()[p])) out.cubes.push_back(idx);
      int axis = 0;
      while (axis < d && ++idx[axis] > b[axis]) {
        idx[axis] = a[axis];
        ++axis;
      }
      if (axis == d) break;
    }
  }
  std::sort(out.cubes.begin(), out.cubes.end());
  out.cubes.erase(std::unique(out.cubes.begin(), out.cubes.end()), out.cubes.end());
  return true;
}

std::vector<Ball> cubes_to_balls(const GridCover& grid, int d) {
  const double s = std::ldexp(1.0, -grid.scale);
  const double r = 0.5 * s * std::sqrt(static_cast<double>(d));
  std::vector<Ball> balls;
  balls.reserve(grid.cubes.size());
  for (const auto& idx : grid.cubes) {
    Vec c(d);
    for (int i = 0; i < d; ++i) c[i] = (static_cast<double>(idx[i]) + 0.5) * s;
    balls.push_back(Ball{c, r});
  }
  return balls;
}

}  // namespace

std::vector<CoverCandidate> mu_candidates(const EuclideanSet& set, const MuOptions& options) {
  require(!set.empty(), "mu_upper: empty set");
  const int d = set.dimension();
  std::vector<CoverCandidate> out;
  CoverCandidate self;
  self.origin = "self";
  for (const auto& piece : set.pieces()) self.balls.push_back(circumscribed_ball(piece));
  self.value = cover_value(self.balls, d);
  out.push_back(std::move(self));
  GridCover grid;
  for (int j = 0; j <= options.max_scale; ++j) {
    if (!dyadic_cubes(set, j, options.max_cubes, grid)) continue;
    CoverCandidate c;
    const double r = 0.5 * std::ldexp(1.0, -j) * std::sqrt(static_cast<double>(d));
    c.value = static_cast<double>(grid.cubes.size()) * std::min(r, std::pow(r, d));
    if (options.materialize_grids) c.balls = cubes_to_balls(grid, d);
    std::ostringstream name;
    name << "dyadic-" << j;
    c.origin = name.str();
    out.push_back(std::move(c));
  }
  return out;
}

CoverCandidate mu_upper(const EuclideanSet& set, const MuOptions& options) {
  MuOptions lean = options;
  lean.materialize_grids = false;
  auto candidates = mu_candidates(set, lean);
  auto best = std::min_element(candidates.begin(), candidates.end(),
                               [](const auto& a, const auto& b) { return a.value < b.value; });
  if (best->origin != "self") {
    GridCover grid;
    const int scale = std::stoi(best->origin.substr(best->origin.find('-') + 1));
    dyadic_cubes(set, scale, options.max_cubes, grid);
    best->balls = cubes_to_balls(grid, set.dimension());
  }
  return std::move(*best);
}

bool covers(const CoverCandidate& cover, const EuclideanSet& set, std::size_t samples,
            std::uint64_t seed) {
  if (set.empty()) return true;
  const auto [lo, hi] = set.bounding_box();
  const int d = set.dimension();
  Rng rng = make_stream(seed, 0);
  Vec x(d);
  for (std::size_t s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) x[i] = uniform(rng, lo[i], hi[i]);
    if (!set.contains(x)) continue;
    const bool inside = std::any_of(cover.balls.begin(), cover.balls.end(), [&](const Ball& b) {
      return (x - b.center).norm() <= b.radius * (1.0 + 1e-12);
    });
    if (!inside) return false;
  }
  return true;
}

}  // namespace ul
