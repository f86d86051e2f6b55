#include "ul/lattice.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "ul/detail/enumerate.hpp"
#include "ul/errors.hpp"

namespace ul {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

using detail::for_each_in_cube;
using detail::for_each_near_ball;

void finalize(LatticePointSet& m) {
  std::sort(m.indices.begin(), m.indices.end());
  m.indices.erase(std::unique(m.indices.begin(), m.indices.end()), m.indices.end());
}

}  // namespace

RandomLattice::RandomLattice(Rotation rho, double v) : rho_(std::move(rho)), v_(v) {
  require(v_ > 1.0 && v_ < 2.0, "RandomLattice: v must lie in (1, 2)");
}

RandomLattice RandomLattice::draw(int d, Rng& rng) {
  Rotation rho = sample_rotation(d, rng);
  double v = 1.0;
  while (v <= 1.0) v = uniform(rng, 1.0, 2.0);
  return RandomLattice(std::move(rho), v);
}

Vec lattice_point(const RandomLattice& lattice, std::span<const int> k) {
  const int d = lattice.dimension();
  require(static_cast<int>(k.size()) == d, "lattice_point: dimension mismatch");
  Vec kv(d);
  for (int i = 0; i < d; ++i) kv[i] = k[static_cast<std::size_t>(i)];
  return lattice.v() * (lattice.rho().matrix().transpose() * kv);
}

bool LatticePointSet::contains(const IntVec& k) const {
  return std::binary_search(indices.begin(), indices.end(), k);
}

LatticePointSet intersect(const RandomLattice& lattice, const EuclideanSet& sigma) {
  require(sigma.dimension() == lattice.dimension(), "intersect: dimension mismatch");
  LatticePointSet out;
  out.dimension = lattice.dimension();
  const Mat& rho = lattice.rho().matrix();
  const double v = lattice.v();
  // v rho^T k in piece  <=>  k in rho(piece) / v.
  for (const auto& piece : sigma.pieces()) {
    const Ball hull = circumscribed_ball(piece);
    const Vec center = rho * hull.center / v;
    for_each_near_ball(center, hull.radius / v, [&](const IntVec& k) {
      if (piece_contains(piece, lattice_point(lattice, k))) out.indices.push_back(k);
    });
  }
  finalize(out);
  return out;
}

LatticePointSet intersect_brute_force(const RandomLattice& lattice, const EuclideanSet& sigma) {
  LatticePointSet out;
  out.dimension = lattice.dimension();
  const int n = static_cast<int>(std::ceil(sigma.bounding_radius() / lattice.v()));
  const std::vector<int> lo(static_cast<std::size_t>(out.dimension), -n);
  const std::vector<int> hi(static_cast<std::size_t>(out.dimension), n);
  for_each_in_cube(lo, hi, [&](const IntVec& k) {
    if (sigma.contains(lattice_point(lattice, k))) out.indices.push_back(k);
  });
  finalize(out);
  return out;
}

std::vector<int> axis_counts(const LatticePointSet& m) {
  std::vector<int> counts(static_cast<std::size_t>(m.dimension), 0);
  for (int axis = 0; axis < m.dimension; ++axis) {
    std::vector<int> values;
    values.reserve(m.indices.size());
    for (const auto& k : m.indices) values.push_back(k[static_cast<std::size_t>(axis)]);
    std::sort(values.begin(), values.end());
    counts[static_cast<std::size_t>(axis)] =
        static_cast<int>(std::unique(values.begin(), values.end()) - values.begin());
  }
  return counts;
}

int order_of(const LatticePointSet& m) {
  const auto counts = axis_counts(m);
  int total = 0;
  for (int c : counts) total += c;
  return total;
}

int m_function(const RandomLattice& lattice, const EuclideanSet& sigma, int k_range) {
  require(static_cast<double>(k_range) >= sigma.bounding_radius() / lattice.v() - 1e-12,
          "m_function: k_range must be >= bounding_radius / v");
  // Every lattice point of sigma has |k_1| <= |k| <= bounding_radius / v, so
  // the distinct nonzero first coordinates of M are exactly the k hit.
  const LatticePointSet m = intersect(lattice, sigma);
  std::set<int> firsts;
  for (const auto& k : m.indices) {
    if (k[0] != 0 && std::abs(k[0]) <= k_range) firsts.insert(k[0]);
  }
  return static_cast<int>(firsts.size());
}

double polar_constant(int d) {
  require(d >= 1, "polar_constant: d must be >= 1");
  return 1.0 / unit_sphere_area(d);
}

LalIntegrand::LalIntegrand(int dimension, std::string name, Value value, RadialMajorant envelope,
                           OuterIntegral outer_integral)
    : dimension_(dimension),
      name_(std::move(name)),
      value_(std::move(value)),
      envelope_(std::move(envelope)),
      outer_(std::move(outer_integral)) {
  require(dimension_ >= 1, "LalIntegrand: dimension must be >= 1");
  require(envelope_.compact() || static_cast<bool>(envelope_.bound),
          "LalIntegrand: integrand needs compact support or a decay bound");
}

LalIntegrand annulus_indicator(int d, double inner, double outer) {
  require(0.0 <= inner && inner < outer, "annulus_indicator: need 0 <= inner < outer");
  RadialMajorant env;
  env.support_radius = outer;
  env.bound = [outer](double r) { return r <= outer ? 1.0 : 0.0; };
  return LalIntegrand(
      d, "annulus",
      [inner, outer](const Vec& x) {
        const double r = x.norm();
        return (r >= inner && r <= outer) ? 1.0 : 0.0;
      },
      std::move(env),
      [d, inner, outer](double radius) {
        Estimate e;
        e.exact = true;
        const double a = std::max(radius, inner);
        if (a < outer) e.value = unit_ball_volume(d) * (std::pow(outer, d) - std::pow(a, d));
        return e;
      });
}

LalIntegrand set_indicator(const EuclideanSet& set, std::size_t reference_trials,
                           std::uint64_t reference_seed) {
  require(!set.empty(), "set_indicator: empty set");
  RadialMajorant env;
  env.support_radius = set.bounding_radius();
  env.bound = [](double) { return 1.0; };
  return LalIntegrand(
      set.dimension(), "set-indicator",
      [set](const Vec& x) { return set.contains(x) ? 1.0 : 0.0; }, std::move(env),
      [set, reference_trials, reference_seed](double radius) {
        const auto [lo, hi] = set.bounding_box();
        const double box = (hi - lo).prod();
        const int d = set.dimension();
        const auto hits = evaluate_trials(reference_trials, [&](std::size_t t) {
          Rng rng = make_stream(reference_seed, t);
          Vec x(d);
          for (int i = 0; i < d; ++i) x[i] = uniform(rng, lo[i], hi[i]);
          return (x.norm() >= radius && set.contains(x)) ? box : 0.0;
        });
        return mean_and_stderr(hits);
      });
}

namespace {

double shell_count(int j, int d) {
  return std::pow(2.0 * j + 1.0, d) - std::pow(2.0 * j - 1.0, d);
}

double cube_sum(const LalIntegrand& phi, const Mat& rho, double scale, int n) {
  const int d = phi.dimension();
  const std::vector<int> lo(static_cast<std::size_t>(d), -n);
  const std::vector<int> hi(static_cast<std::size_t>(d), n);
  Vec kv(d);
  Vec x(d);
  const double r_max = phi.envelope().support_radius;
  double sum = 0.0;
  for_each_in_cube(lo, hi, [&](const IntVec& k) {
    double norm2 = 0.0;
    for (int i = 0; i < d; ++i) {
      kv[i] = k[static_cast<std::size_t>(i)];
      norm2 += kv[i] * kv[i];
    }
    if (norm2 == 0.0) return;
    if (scale * std::sqrt(norm2) > r_max * (1.0 + 1e-12)) return;
    x.noalias() = scale * (rho * kv);
    sum += phi(x);
  });
  return sum;
}

// Bound on sum over sup-norm shells j > n of phi(scale * rho k).
double shell_tail(const RadialMajorant& env, int d, double scale, int n) {
  double tail = 0.0;
  for (int j = n + 1; j < n + 100000; ++j) {
    const double term = shell_count(j, d) * env.bound(scale * j);
    tail += term;
    if (term == 0.0 || (j > n + 4 && term < 1e-18 * tail)) return tail;
  }
  throw PreconditionError("lattice_sum: envelope decays too slowly to truncate the lattice sum");
}

}  // namespace

double lattice_sum(const LalIntegrand& phi, const Rotation& rho, double scale, double rel_tail) {
  require(rho.dimension() == phi.dimension(), "lattice_sum: dimension mismatch");
  const int d = phi.dimension();
  const auto& env = phi.envelope();
  if (env.compact()) {
    const int n = static_cast<int>(std::floor(env.support_radius / scale * (1.0 + 1e-12)));
    return n < 1 ? 0.0 : cube_sum(phi, rho.matrix(), scale, n);
  }
  int n = std::max(1, static_cast<int>(std::ceil(1.0 / scale)));
  while (true) {
    const double partial = cube_sum(phi, rho.matrix(), scale, n);
    const double tail = shell_tail(env, d, scale, n);
    if (tail <= rel_tail * partial || tail < 1e-300) return partial;
    require(n < 4096, "lattice_sum: truncation radius exceeds 4096 shells");
    n = 2 * n;
  }
}

LalReports verify_lal(const LalIntegrand& phi, std::size_t trials, std::uint64_t seed) {
  require(trials >= 2, "verify_lal: trials must be >= 2");
  const auto start = Clock::now();
  const int d = phi.dimension();
  std::vector<double> dilated(trials), contracted(trials);
  const auto both = map_items<std::pair<double, double>>(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    const RandomLattice lattice = RandomLattice::draw(d, rng);
    return std::pair<double, double>{lattice_sum(phi, lattice.rho(), lattice.v()),
                                     lattice_sum(phi, lattice.rho(), 1.0 / lattice.v())};
  });
  for (std::size_t t = 0; t < trials; ++t) {
    dilated[t] = both[t].first;
    contracted[t] = both[t].second;
  }
  LalReports out;
  auto fill = [&](ExpectationReport& r, const std::vector<double>& values, double radius) {
    const Estimate e = mean_and_stderr(values);
    r.estimate = e.value;
    r.std_error = e.std_error;
    r.trials = trials;
    r.reference = phi.outer_integral(radius).value;
    r.bound = kLatticeAveragingConstant * r.reference;
    r.seed = seed;
  };
  fill(out.dilated, dilated, 1.0);
  fill(out.contracted, contracted, 0.5);
  out.dilated.wall_time_ms = out.contracted.wall_time_ms = elapsed_ms(start);
  return out;
}

ExpectationReport estimate_card(const EuclideanSet& sigma, std::size_t trials, std::uint64_t seed) {
  require(trials >= 2, "estimate_card: trials must be >= 2");
  require(sigma.contains(Vec::Zero(sigma.dimension())), "estimate_card: 0 must lie in sigma");
  const auto start = Clock::now();
  const int d = sigma.dimension();
  const auto values = evaluate_trials(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    return static_cast<double>(intersect(RandomLattice::draw(d, rng), sigma).size()) - 1.0;
  });
  const Estimate e = mean_and_stderr(values);
  ExpectationReport r;
  r.estimate = e.value;
  r.std_error = e.std_error;
  r.trials = trials;
  r.seed = seed;
  r.reference = lebesgue_measure(sigma, 400000, substream_seed(seed, 0xca7d)).value;
  r.bound = kLatticeAveragingConstant * r.reference;
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

ExpectationReport estimate_order(const EuclideanSet& sigma, std::size_t trials, std::uint64_t seed,
                                 const OrderOptions& options) {
  require(trials >= 2, "estimate_order: trials must be >= 2");
  require(sigma.contains(Vec::Zero(sigma.dimension())), "estimate_order: 0 must lie in sigma");
  const auto start = Clock::now();
  const int d = sigma.dimension();
  const auto values = evaluate_trials(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    return static_cast<double>(order_of(intersect(RandomLattice::draw(d, rng), sigma)) - d);
  });
  const Estimate e = mean_and_stderr(values);
  const double mu = mu_upper(sigma, options.mu).value;
  const Estimate w = mean_width(sigma, options.width_trials, substream_seed(seed, 0x3d7));
  ExpectationReport r;
  r.estimate = e.value;
  r.std_error = e.std_error;
  r.trials = trials;
  r.seed = seed;
  r.reference = std::min(mu, w.value);
  r.bound = kLatticeAveragingConstant * r.reference;
  r.extras = {{"mu_upper", mu}, {"mean_width", w.value}, {"mean_width_stderr", w.std_error}};
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

ExpectationReport estimate_m(const EuclideanSet& sigma, std::size_t trials, std::uint64_t seed) {
  require(trials >= 2, "estimate_m: trials must be >= 2");
  const auto start = Clock::now();
  const int d = sigma.dimension();
  const double radius = sigma.bounding_radius();
  const auto values = evaluate_trials(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    const RandomLattice lattice = RandomLattice::draw(d, rng);
    const int k_range = static_cast<int>(std::ceil(radius / lattice.v()));
    return static_cast<double>(m_function(lattice, sigma, k_range));
  });
  const Estimate e = mean_and_stderr(values);
  ExpectationReport r;
  r.estimate = e.value;
  r.std_error = e.std_error;
  r.trials = trials;
  r.seed = seed;
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

}  // namespace ul
