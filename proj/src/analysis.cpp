#include "ul/analysis.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "ul/detail/enumerate.hpp"
#include "ul/errors.hpp"

namespace ul {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// exp(i angle)
Complex phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

Complex box_hat(const AxisBox& b, const Vec& xi) {
  Complex out{1.0, 0.0};
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    const double w = b.upper[i] - b.lower[i];
    out *= phase(kPi * (b.upper[i] + b.lower[i]) * xi[i]) * (w * sinc(kPi * w * xi[i]));
  }
  return out;
}

bool in_box(const AxisBox& b, const Vec& x) {
  return (x.array() >= b.lower.array()).all() && (x.array() <= b.upper.array()).all();
}

AxisBox shifted(const AxisBox& b, const Vec& offset) { return {b.lower + offset, b.upper + offset}; }

RadialMajorant shift_envelope(RadialMajorant env, double shift) {
  if (shift == 0.0) return env;
  auto base = env.bound;
  return {env.support_radius + shift, [base, shift](double r) { return base(std::max(0.0, r - shift)); }};
}

void require_dim(const Vec& x, int d, const char* what) {
  require(x.size() == d, std::string(what) + ": dimension mismatch");
}

}  // namespace

struct TestFunction::Node {
  Kind kind = Kind::gaussian;
  int d = 1;
  double scale = 1.0;
  AxisBox box;
  std::vector<std::pair<Complex, TestFunction>> terms;
  std::vector<TestFunction> base;
  Vec shift;
};

TestFunction::TestFunction(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

TestFunction TestFunction::gaussian(int d, double scale) {
  require(d >= 1, "gaussian: dimension must be >= 1");
  require(scale > 0.0 && std::isfinite(scale), "gaussian: scale must be positive");
  auto n = std::make_shared<Node>();
  n->kind = Kind::gaussian;
  n->d = d;
  n->scale = scale;
  return TestFunction(std::move(n));
}

TestFunction TestFunction::box(AxisBox b) {
  require(b.lower.size() >= 1 && b.lower.size() == b.upper.size(), "box: corner dimension mismatch");
  require((b.lower.array() < b.upper.array()).all(), "box: lower < upper required on every axis");
  auto n = std::make_shared<Node>();
  n->kind = Kind::box;
  n->d = static_cast<int>(b.lower.size());
  n->box = std::move(b);
  return TestFunction(std::move(n));
}

TestFunction TestFunction::combination(std::vector<std::pair<Complex, TestFunction>> terms) {
  require(!terms.empty(), "combination: at least one term required");
  const int d = terms.front().second.dimension();
  for (const auto& t : terms) require(t.second.dimension() == d, "combination: dimension mismatch");
  auto n = std::make_shared<Node>();
  n->kind = Kind::combination;
  n->d = d;
  n->terms = std::move(terms);
  return TestFunction(std::move(n));
}

TestFunction TestFunction::modulated(TestFunction base, Vec frequency) {
  require_dim(frequency, base.dimension(), "modulated");
  auto n = std::make_shared<Node>();
  n->kind = Kind::modulated;
  n->d = base.dimension();
  n->base.push_back(std::move(base));
  n->shift = std::move(frequency);
  return TestFunction(std::move(n));
}

TestFunction TestFunction::translated(TestFunction base, Vec offset) {
  require_dim(offset, base.dimension(), "translated");
  auto n = std::make_shared<Node>();
  n->kind = Kind::translated;
  n->d = base.dimension();
  n->base.push_back(std::move(base));
  n->shift = std::move(offset);
  return TestFunction(std::move(n));
}

TestFunction::Kind TestFunction::kind() const { return node_->kind; }
int TestFunction::dimension() const { return node_->d; }
double TestFunction::scale() const { return node_->scale; }
const AxisBox& TestFunction::box_shape() const { return node_->box; }
const std::vector<std::pair<Complex, TestFunction>>& TestFunction::terms() const { return node_->terms; }
const TestFunction& TestFunction::base() const {
  require(!node_->base.empty(), "base: only modulated/translated functions have a base");
  return node_->base.front();
}
const Vec& TestFunction::shift() const { return node_->shift; }

Complex TestFunction::evaluate(const Vec& x) const {
  require_dim(x, dimension(), "evaluate");
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::gaussian:
      return std::exp(-kPi * x.squaredNorm() / (n.scale * n.scale));
    case Kind::box:
      return in_box(n.box, x) ? 1.0 : 0.0;
    case Kind::combination: {
      Complex s{0.0, 0.0};
      for (const auto& [c, g] : n.terms) s += c * g.evaluate(x);
      return s;
    }
    case Kind::modulated:
      return n.base.front().evaluate(x) * phase(kTwoPi * x.dot(n.shift));
    case Kind::translated:
      return n.base.front().evaluate(x - n.shift);
  }
  return 0.0;
}

Complex TestFunction::evaluate_hat(const Vec& xi) const {
  require_dim(xi, dimension(), "evaluate_hat");
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::gaussian:
      return std::pow(n.scale, n.d) * std::exp(-kPi * n.scale * n.scale * xi.squaredNorm());
    case Kind::box:
      return box_hat(n.box, xi);
    case Kind::combination: {
      Complex s{0.0, 0.0};
      for (const auto& [c, g] : n.terms) s += c * g.evaluate_hat(xi);
      return s;
    }
    case Kind::modulated:
      return n.base.front().evaluate_hat(xi + n.shift);
    case Kind::translated:
      return phase(kTwoPi * n.shift.dot(xi)) * n.base.front().evaluate_hat(xi);
  }
  return 0.0;
}

RadialMajorant TestFunction::space_envelope() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::gaussian: {
      const double a2 = n.scale * n.scale;
      return {std::numeric_limits<double>::infinity(), [a2](double r) { return std::exp(-kPi * r * r / a2); }};
    }
    case Kind::box: {
      const double radius = EuclideanSet(n.d, {n.box}).bounding_radius();
      return {radius, [radius](double r) { return r <= radius * (1.0 + 1e-12) ? 1.0 : 0.0; }};
    }
    case Kind::combination: {
      std::vector<std::pair<double, RadialMajorant>> parts;
      double support = 0.0;
      for (const auto& [c, g] : n.terms) {
        parts.emplace_back(std::abs(c), g.space_envelope());
        support = std::max(support, parts.back().second.support_radius);
      }
      return {support, [parts](double r) {
                double s = 0.0;
                for (const auto& [w, e] : parts) s += w * e.bound(r);
                return s;
              }};
    }
    case Kind::modulated:
      return n.base.front().space_envelope();
    case Kind::translated:
      return shift_envelope(n.base.front().space_envelope(), n.shift.norm());
  }
  return {};
}

RadialMajorant TestFunction::frequency_envelope() const {
  const Node& n = *node_;
  const double inf = std::numeric_limits<double>::infinity();
  switch (n.kind) {
    case Kind::gaussian: {
      const double a = n.scale;
      const double ad = std::pow(a, n.d);
      return {inf, [a, ad](double r) { return ad * std::exp(-kPi * a * a * r * r); }};
    }
    case Kind::box: {
      // Some coordinate of xi exceeds |xi| / sqrt(d); bound that sinc factor.
      const Vec w = n.box.upper - n.box.lower;
      const double volume = w.prod();
      const double w_min = w.minCoeff();
      const double root_d = std::sqrt(static_cast<double>(n.d));
      return {inf, [volume, w_min, root_d](double r) {
                return volume * std::min(1.0, root_d / (kPi * std::max(r, 1e-300) * w_min));
              }};
    }
    case Kind::combination: {
      std::vector<std::pair<double, RadialMajorant>> parts;
      for (const auto& [c, g] : n.terms) parts.emplace_back(std::abs(c), g.frequency_envelope());
      return {inf, [parts](double r) {
                double s = 0.0;
                for (const auto& [w, e] : parts) s += w * e.bound(r);
                return s;
              }};
    }
    case Kind::modulated: {
      auto env = shift_envelope(n.base.front().frequency_envelope(), n.shift.norm());
      env.support_radius = inf;
      return env;
    }
    case Kind::translated:
      return n.base.front().frequency_envelope();
  }
  return {};
}

std::optional<EuclideanSet> TestFunction::support() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::gaussian:
      return std::nullopt;
    case Kind::box:
      return EuclideanSet(n.d, {n.box});
    case Kind::combination: {
      EuclideanSet out(n.d);
      for (const auto& [c, g] : n.terms) {
        auto s = g.support();
        if (!s) return std::nullopt;
        out = out.united(*s);
      }
      return out;
    }
    case Kind::modulated:
      return n.base.front().support();
    case Kind::translated: {
      auto s = n.base.front().support();
      if (!s) return std::nullopt;
      return s->translated(n.shift);
    }
  }
  return std::nullopt;
}

double TestFunction::energy() const {
  const auto atoms = flatten(*this);
  return autocorrelation(atoms, Vec::Zero(dimension())).real();
}

TestFunction TestFunction::scaled(double lambda) const {
  require(lambda > 0.0 && std::isfinite(lambda), "scaled: lambda must be positive");
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::gaussian:
      return gaussian(n.d, n.scale / lambda);
    case Kind::box:
      return box({n.box.lower / lambda, n.box.upper / lambda});
    case Kind::combination: {
      std::vector<std::pair<Complex, TestFunction>> terms;
      for (const auto& [c, g] : n.terms) terms.emplace_back(c, g.scaled(lambda));
      return combination(std::move(terms));
    }
    case Kind::modulated:
      return modulated(n.base.front().scaled(lambda), lambda * n.shift);
    case Kind::translated:
      return translated(n.base.front().scaled(lambda), n.shift / lambda);
  }
  return *this;
}

std::vector<Atom> flatten(const TestFunction& f) {
  const int d = f.dimension();
  using Kind = TestFunction::Kind;
  switch (f.kind()) {
    case Kind::gaussian: {
      Atom a;
      a.scale = f.scale();
      a.center = Vec::Zero(d);
      a.modulation = Vec::Zero(d);
      return {a};
    }
    case Kind::box: {
      Atom a;
      a.is_box = true;
      a.box = f.box_shape();
      a.center = Vec::Zero(d);
      a.modulation = Vec::Zero(d);
      return {a};
    }
    case Kind::combination: {
      std::vector<Atom> out;
      for (const auto& [c, g] : f.terms()) {
        for (Atom a : flatten(g)) {
          a.coefficient *= c;
          out.push_back(std::move(a));
        }
      }
      return out;
    }
    case Kind::modulated: {
      auto out = flatten(f.base());
      for (Atom& a : out) a.modulation += f.shift();
      return out;
    }
    case Kind::translated: {
      auto out = flatten(f.base());
      for (Atom& a : out) {
        a.coefficient *= phase(-kTwoPi * f.shift().dot(a.modulation));
        if (a.is_box)
          a.box = shifted(a.box, f.shift());
        else
          a.center += f.shift();
      }
      return out;
    }
  }
  return {};
}

std::optional<BoxFamily> box_family(const TestFunction& f) {
  const auto atoms = flatten(f);
  BoxFamily fam;
  fam.modulation = atoms.front().modulation;
  for (const Atom& a : atoms) {
    if (!a.is_box || a.modulation != fam.modulation) return std::nullopt;
    fam.terms.emplace_back(a.coefficient, a.box);
  }
  return fam;
}

Complex atom_value(const Atom& a, const Vec& x) {
  double g;
  if (a.is_box)
    g = in_box(a.box, x) ? 1.0 : 0.0;
  else
    g = std::exp(-kPi * (x - a.center).squaredNorm() / (a.scale * a.scale));
  if (g == 0.0) return 0.0;
  return a.coefficient * g * phase(kTwoPi * x.dot(a.modulation));
}

Complex atom_hat(const Atom& a, const Vec& xi) {
  const Vec eta = xi + a.modulation;
  if (a.is_box) return a.coefficient * box_hat(a.box, eta);
  const double ad = std::pow(a.scale, static_cast<double>(xi.size()));
  return a.coefficient * phase(kTwoPi * a.center.dot(eta)) * ad *
         std::exp(-kPi * a.scale * a.scale * eta.squaredNorm());
}

namespace {

// int g_a(x) g_b(x + z) exp(2 i pi <x, eta>) dx for the real shapes of two atoms.
Complex shape_inner(const Atom& a, const Atom& b, const Vec& z, const Vec& eta) {
  const Eigen::Index d = z.size();
  if (a.is_box && b.is_box) {
    const AxisBox bb = shifted(b.box, -z);
    AxisBox cap{a.box.lower.cwiseMax(bb.lower), a.box.upper.cwiseMin(bb.upper)};
    if ((cap.lower.array() >= cap.upper.array()).any()) return 0.0;
    return box_hat(cap, eta);
  }
  if (!a.is_box && !b.is_box) {
    Complex out{1.0, 0.0};
    const double ia = 1.0 / (a.scale * a.scale);
    const double ib = 1.0 / (b.scale * b.scale);
    const double alpha = kPi * (ia + ib);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double p = a.center[i];
      const double q = b.center[i] - z[i];
      const Complex beta{kTwoPi * (p * ia + q * ib), kTwoPi * eta[i]};
      const double gamma = -kPi * (p * p * ia + q * q * ib);
      out *= std::sqrt(kPi / alpha) * std::exp(beta * beta / (4.0 * alpha) + gamma);
    }
    return out;
  }
  require(eta.cwiseAbs().maxCoeff() == 0.0,
          "autocorrelation: box/Gaussian cross terms need equal modulations");
  const Atom& g = a.is_box ? b : a;
  const AxisBox box = a.is_box ? a.box : shifted(b.box, -z);
  const Vec center = a.is_box ? Vec(g.center - z) : g.center;
  double out = 1.0;
  const double s = std::sqrt(kPi) / g.scale;
  for (Eigen::Index i = 0; i < d; ++i)
    out *= 0.5 * g.scale * (std::erf(s * (box.upper[i] - center[i])) - std::erf(s * (box.lower[i] - center[i])));
  return out;
}

}  // namespace

Complex autocorrelation(std::span<const Atom> atoms, const Vec& z) {
  Complex sum{0.0, 0.0};
  for (const Atom& a : atoms) {
    for (const Atom& b : atoms) {
      const Complex w = a.coefficient * std::conj(b.coefficient) * phase(-kTwoPi * z.dot(b.modulation));
      sum += w * shape_inner(a, b, z, a.modulation - b.modulation);
    }
  }
  return sum;
}

double envelope_cutoff(const RadialMajorant& envelope, double rel) {
  if (envelope.compact()) return envelope.support_radius;
  const double b0 = envelope.bound(0.0);
  if (!(b0 > 0.0)) return 0.0;
  double hi = 1.0;
  while (envelope.bound(hi) > rel * b0) {
    hi *= 2.0;
    require(hi < 1e8, "envelope_cutoff: envelope does not decay");
  }
  double lo = hi / 2.0 < 1.0 ? 0.0 : hi / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (envelope.bound(mid) > rel * b0 ? lo : hi) = mid;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Periodization

Periodization::Periodization(TestFunction source, RandomLattice lattice)
    : source_(std::move(source)),
      lattice_(std::move(lattice)),
      atoms_(flatten(source_)),
      family_(box_family(source_)),
      space_cutoff_(envelope_cutoff(source_.space_envelope(), 1e-13)) {
  require(source_.dimension() == lattice_.dimension(), "periodize: dimension mismatch");
}

Complex Periodization::coefficient(std::span<const int> m) const {
  require(static_cast<int>(m.size()) == dimension(), "coefficient: dimension mismatch");
  const Vec xi = lattice_point(lattice_, m);
  return std::sqrt(lattice_.v()) * source_.evaluate_hat(xi);
}

Complex Periodization::value(const Vec& t) const {
  require_dim(t, dimension(), "value");
  const int d = dimension();
  const double v = lattice_.v();
  const Mat& rho = lattice_.rho().matrix();
  Vec s(d);
  Vec x(d);
  Complex sum{0.0, 0.0};
  detail::for_each_in_ball(Vec(-t), v * space_cutoff_, [&](const std::vector<int>& k) {
    for (int i = 0; i < d; ++i) s[i] = k[static_cast<std::size_t>(i)] + t[i];
    x.noalias() = rho.transpose() * s / v;
    for (const Atom& a : atoms_) sum += atom_value(a, x);
  });
  return std::pow(v, 0.5 - d) * sum;
}

double Periodization::energy() const {
  const int d = dimension();
  const double v = lattice_.v();
  const Mat& rho = lattice_.rho().matrix();
  Vec jv(d);
  double sum = 0.0;
  detail::for_each_in_ball(Vec::Zero(d), 2.0 * v * space_cutoff_, [&](const std::vector<int>& j) {
    for (int i = 0; i < d; ++i) jv[i] = j[static_cast<std::size_t>(i)];
    const Vec z = rho.transpose() * jv / v;
    sum += autocorrelation(atoms_, z).real();
  });
  return std::pow(v, 1.0 - d) * sum;
}

namespace {

double ramp(double s) { return s > 0.0 ? s : 0.0; }

// Ramp convolved with the N(0, tau^2) density.
double smooth_ramp(double s, double tau) {
  const double u = s / tau;
  return s * 0.5 * std::erfc(-u / std::numbers::sqrt2) + tau * std::exp(-0.5 * u * u) / std::sqrt(kTwoPi);
}

struct Trapezoid {
  double knots[4];
  double exact(double z) const {
    return ramp(z - knots[0]) - ramp(z - knots[1]) - ramp(z - knots[2]) + ramp(z - knots[3]);
  }
  double smooth(double z, double tau) const {
    return smooth_ramp(z - knots[0], tau) - smooth_ramp(z - knots[1], tau) - smooth_ramp(z - knots[2], tau) +
           smooth_ramp(z - knots[3], tau);
  }
};

struct BoxPair {
  Complex weight;
  std::vector<Trapezoid> axes;
};

// sum_m |h(v rho^T m + y)|^2 for h the transform of a box combination. The
// Gaussian G(eta) = exp(-pi |eta|^2 / sigma^2) splits the sum: the G part is
// summed directly, the (1 - G) part through Poisson summation, where it
// becomes a finite sum of the autocorrelation minus its Gaussian smoothing.
double box_family_coefficient_energy(const BoxFamily& fam, const RandomLattice& lattice) {
  const int d = lattice.dimension();
  const double v = lattice.v();
  const Mat& rho = lattice.rho().matrix();
  const Vec& y = fam.modulation;

  double w_min = std::numeric_limits<double>::infinity();
  for (const auto& [c, b] : fam.terms) w_min = std::min(w_min, (b.upper - b.lower).minCoeff());
  const double sigma = 3.0 / w_min;
  const double tau = 1.0 / (sigma * std::sqrt(kTwoPi));

  double near = 0.0;
  {
    Vec mv(d);
    const Vec center = -rho * y / v;
    detail::for_each_in_ball(center, 3.7 * sigma / v, [&](const std::vector<int>& m) {
      for (int i = 0; i < d; ++i) mv[i] = m[static_cast<std::size_t>(i)];
      const Vec eta = v * (rho.transpose() * mv) + y;
      Complex h{0.0, 0.0};
      for (const auto& [c, b] : fam.terms) h += c * box_hat(b, eta);
      near += std::norm(h) * std::exp(-kPi * eta.squaredNorm() / (sigma * sigma));
    });
  }

  std::vector<BoxPair> pairs;
  double reach = 0.0;
  for (const auto& [ca, a] : fam.terms) {
    for (const auto& [cb, b] : fam.terms) {
      BoxPair p{ca * std::conj(cb), {}};
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) {
        Trapezoid t{{b.lower[i] - a.upper[i], b.lower[i] - a.lower[i], b.upper[i] - a.upper[i],
                     b.upper[i] - a.lower[i]}};
        const double r = std::max(std::abs(t.knots[0]), std::abs(t.knots[3]));
        r2 += r * r;
        p.axes.push_back(t);
      }
      reach = std::max(reach, std::sqrt(r2));
      pairs.push_back(std::move(p));
    }
  }

  double far = 0.0;
  {
    Vec jv(d);
    detail::for_each_in_ball(Vec::Zero(d), v * (reach + 9.0 * tau), [&](const std::vector<int>& j) {
      for (int i = 0; i < d; ++i) jv[i] = j[static_cast<std::size_t>(i)];
      const Vec z = rho.transpose() * jv / v;
      Complex diff{0.0, 0.0};
      for (const BoxPair& p : pairs) {
        double exact = 1.0, smooth = 1.0;
        for (int i = 0; i < d; ++i) {
          exact *= p.axes[static_cast<std::size_t>(i)].exact(z[i]);
          smooth *= p.axes[static_cast<std::size_t>(i)].smooth(z[i], tau);
        }
        diff += p.weight * (exact - smooth);
      }
      far += (diff * phase(-kTwoPi * z.dot(y))).real();
    });
  }
  return v * near + std::pow(v, 1.0 - d) * far;
}

}  // namespace

double Periodization::coefficient_energy() const {
  if (family_) return box_family_coefficient_energy(*family_, lattice_);
  for (const Atom& a : atoms_)
    require(!a.is_box, "coefficient_energy: mixed box/Gaussian sources or box sources with several "
                       "modulations are not supported");
  const int d = dimension();
  const double v = lattice_.v();
  const double cutoff = envelope_cutoff(source_.frequency_envelope(), 1e-10);
  const Mat& rho = lattice_.rho().matrix();
  Vec mv(d);
  double sum = 0.0;
  detail::for_each_in_ball(Vec::Zero(d), cutoff / v, [&](const std::vector<int>& m) {
    for (int i = 0; i < d; ++i) mv[i] = m[static_cast<std::size_t>(i)];
    const Vec xi = v * (rho.transpose() * mv);
    Complex h{0.0, 0.0};
    for (const Atom& a : atoms_) h += atom_hat(a, xi);
    sum += std::norm(h);
  });
  return v * sum;
}

std::vector<std::uint8_t> Periodization::support_mask(int grid_n) const {
  require(grid_n >= 1, "support_mask: grid_n must be >= 1");
  const auto support = source_.support();
  require(support.has_value(), "support_fraction: source must have compact support");
  const int d = dimension();
  const double v = lattice_.v();
  const Mat& rho = lattice_.rho().matrix();
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(grid_n);
  std::vector<std::uint8_t> mask(total, 0);

  Vec s(d), x(d);
  std::vector<int> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  for (const Piece& piece : support->pieces()) {
    const Ball cb = circumscribed_ball(piece);
    const Vec c = v * (rho * cb.center);
    const double r = v * cb.radius;
    std::vector<int> klo(static_cast<std::size_t>(d)), khi(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      klo[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(c[i] - r - 1.0));
      khi[static_cast<std::size_t>(i)] = static_cast<int>(std::ceil(c[i] + r));
    }
    detail::for_each_in_cube(klo, khi, [&](const std::vector<int>& k) {
      for (int i = 0; i < d; ++i) {
        const double a = (c[i] - k[static_cast<std::size_t>(i)] - r) * grid_n - 0.5;
        const double b = (c[i] - k[static_cast<std::size_t>(i)] + r) * grid_n - 0.5;
        lo[static_cast<std::size_t>(i)] = std::max(0, static_cast<int>(std::ceil(a - 1e-9)));
        hi[static_cast<std::size_t>(i)] = std::min(grid_n - 1, static_cast<int>(std::floor(b + 1e-9)));
      }
      detail::for_each_in_cube(lo, hi, [&](const std::vector<int>& idx) {
        std::size_t flat = 0;
        for (int i = d - 1; i >= 0; --i) flat = flat * static_cast<std::size_t>(grid_n) + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
        if (mask[flat]) return;
        for (int i = 0; i < d; ++i)
          s[i] = k[static_cast<std::size_t>(i)] + (idx[static_cast<std::size_t>(i)] + 0.5) / grid_n;
        x.noalias() = rho.transpose() * s / v;
        if (piece_contains(piece, x)) mask[flat] = 1;
      });
    });
  }
  return mask;
}

double Periodization::support_fraction(int grid_n) const {
  const auto mask = support_mask(grid_n);
  std::size_t count = 0;
  for (auto m : mask) count += m;
  return static_cast<double>(count) / static_cast<double>(mask.size());
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

using Rule = std::vector<std::pair<double, double>>;

const Rule& gauss_legendre_30() {
  static const Rule rule = [] {
    using G = boost::math::quadrature::gauss<double, 30>;
    Rule r;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.emplace_back(x[i], w[i]);
      if (x[i] != 0.0) r.emplace_back(-x[i], w[i]);
    }
    std::sort(r.begin(), r.end());
    return r;
  }();
  return rule;
}

Rule composite(double a, double b, int panels) {
  const Rule& base = gauss_legendre_30();
  Rule out;
  out.reserve(base.size() * static_cast<std::size_t>(panels));
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (const auto& [x, w] : base) out.emplace_back(mid + 0.5 * h * x, 0.5 * h * w);
  }
  return out;
}

std::size_t rule_points(int d, int panels) {
  return static_cast<std::size_t>(std::pow(30.0 * panels, d) * (d >= 2 ? 2.0 : 1.0));
}

// int over the shell r_in <= |x - center| <= r_out (a ball when r_in = 0).
template <class F>
double integrate_shell(const Vec& center, double r_in, double r_out, int panels, F&& fn) {
  const auto d = center.size();
  double sum = 0.0;
  if (d == 1) {
    for (const auto& [x, w] : composite(r_in, r_out, panels)) {
      sum += w * fn(Vec::Constant(1, center[0] + x));
      sum += w * fn(Vec::Constant(1, center[0] - x));
    }
    return sum;
  }
  const Rule radial = composite(r_in, r_out, panels);
  const Rule azimuth = composite(0.0, kTwoPi, 2 * panels);
  Vec x(d);
  if (d == 2) {
    for (const auto& [r, wr] : radial)
      for (const auto& [t, wt] : azimuth) {
        x[0] = center[0] + r * std::cos(t);
        x[1] = center[1] + r * std::sin(t);
        sum += wr * wt * r * fn(x);
      }
    return sum;
  }
  require(d == 3, "quadrature: only d <= 3 is supported on a grid");
  const Rule polar = composite(0.0, kPi, panels);
  for (const auto& [r, wr] : radial)
    for (const auto& [p, wp] : polar) {
      const double sp = std::sin(p), cp = std::cos(p);
      for (const auto& [t, wt] : azimuth) {
        x[0] = center[0] + r * sp * std::cos(t);
        x[1] = center[1] + r * sp * std::sin(t);
        x[2] = center[2] + r * cp;
        sum += wr * wp * wt * r * r * sp * fn(x);
      }
    }
  return sum;
}

template <class F>
double integrate_box(const AxisBox& box, int panels, F&& fn) {
  const auto d = box.lower.size();
  std::vector<Rule> rules;
  for (Eigen::Index i = 0; i < d; ++i) rules.push_back(composite(box.lower[i], box.upper[i], panels));
  std::vector<int> lo(static_cast<std::size_t>(d), 0), hi(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) hi[static_cast<std::size_t>(i)] = static_cast<int>(rules[static_cast<std::size_t>(i)].size()) - 1;
  Vec x(d);
  double sum = 0.0;
  detail::for_each_in_cube(lo, hi, [&](const std::vector<int>& idx) {
    double w = 1.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& node = rules[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      x[i] = node.first;
      w *= node.second;
    }
    sum += w * fn(x);
  });
  return sum;
}

template <class F>
double integrate_piece(const Piece& piece, int panels, F&& fn) {
  if (const auto* b = std::get_if<Ball>(&piece)) return integrate_shell(b->center, 0.0, b->radius, panels, fn);
  return integrate_box(std::get<AxisBox>(piece), panels, fn);
}

// Doubles the panel count until two consecutive levels agree to tol_abs.
template <class Level>
Estimate refine(Level&& level, int d, int n0, double tol_abs, bool reject_unresolved, const char* what) {
  constexpr std::size_t kMaxPoints = 20'000'000;
  int n = std::max(1, n0);
  double coarse = level(n);
  while (true) {
    const int next = 2 * n;
    if (rule_points(d, next) > kMaxPoints) {
      require(!reject_unresolved, std::string(what) + ": grid resolution does not resolve the integrand "
                                                       "within the point budget");
      return {coarse, std::numeric_limits<double>::infinity(), rule_points(d, n), false};
    }
    const double fine = level(next);
    const double diff = std::abs(fine - coarse);
    if (diff <= tol_abs) return {fine, diff, rule_points(d, next), false};
    coarse = fine;
    n = next;
  }
}

// Shortest length on which |f|^2 (or |f^|^2) varies.
double feature_length(std::span<const Atom> atoms, Side side) {
  double len = std::numeric_limits<double>::infinity();
  for (const Atom& a : atoms) {
    if (side == Side::space) {
      len = std::min(len, a.is_box ? (a.box.upper - a.box.lower).minCoeff() : a.scale);
    } else {
      len = std::min(len, a.is_box ? 1.0 / (a.box.upper - a.box.lower).maxCoeff() : 1.0 / a.scale);
    }
  }
  return len;
}

double piece_extent(const Piece& piece) {
  if (const auto* b = std::get_if<Ball>(&piece)) return 2.0 * b->radius;
  const auto& box = std::get<AxisBox>(piece);
  return (box.upper - box.lower).maxCoeff();
}

double density(std::span<const Atom> atoms, Side side, const Vec& x) {
  Complex s{0.0, 0.0};
  if (side == Side::space)
    for (const Atom& a : atoms) s += atom_value(a, x);
  else
    for (const Atom& a : atoms) s += atom_hat(a, x);
  return std::norm(s);
}

struct GaussianTail {
  double total;
  double tail;
};

// Single Gaussian atom with a region that is empty or one ball centred on the
// Gaussian's peak.
std::optional<GaussianTail> closed_form_tail(std::span<const Atom> atoms, Side side,
                                             const EuclideanSet& region) {
  if (atoms.size() != 1 || atoms.front().is_box) return std::nullopt;
  const Atom& a = atoms.front();
  const double d = static_cast<double>(region.dimension());
  const double total = std::norm(a.coefficient) * std::pow(a.scale * a.scale / 2.0, d / 2.0);
  if (region.empty()) return GaussianTail{total, total};
  if (region.pieces().size() != 1) return std::nullopt;
  const auto* ball = std::get_if<Ball>(&region.pieces().front());
  if (!ball) return std::nullopt;
  const Vec peak = side == Side::space ? a.center : Vec(-a.modulation);
  if ((ball->center - peak).norm() > 1e-12) return std::nullopt;
  const double r2 = ball->radius * ball->radius;
  const double x = side == Side::space ? kTwoPi * r2 / (a.scale * a.scale) : kTwoPi * a.scale * a.scale * r2;
  return GaussianTail{total, total * boost::math::gamma_q(d / 2.0, x)};
}

Estimate monte_carlo_inside(std::span<const Atom> atoms, Side side, const EuclideanSet& region,
                            std::size_t samples, std::uint64_t seed) {
  constexpr std::size_t kBlock = 4096;
  const int d = region.dimension();
  const auto [lo, hi] = region.bounding_box();
  const double box_volume = (hi - lo).prod();
  const std::size_t blocks = std::max<std::size_t>(2, (samples + kBlock - 1) / kBlock);
  std::vector<double> squares(blocks);
  const auto means = evaluate_trials(blocks, [&](std::size_t b) {
    Rng rng = make_stream(seed, b);
    Vec x(d);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < kBlock; ++i) {
      for (int k = 0; k < d; ++k) x[k] = uniform(rng, lo[k], hi[k]);
      const double val = region.contains(x) ? box_volume * density(atoms, side, x) : 0.0;
      s += val;
      s2 += val * val;
    }
    squares[b] = s2;
    return s;
  });
  const double n = static_cast<double>(blocks * kBlock);
  const double mean = pairwise_sum(means) / n;
  const double second = pairwise_sum(squares) / n;
  const double var = std::max(0.0, second - mean * mean) * n / (n - 1.0);
  return {mean, std::sqrt(var / n), blocks * kBlock, false};
}

}  // namespace

Estimate energy_inside(const TestFunction& f, Side side, const EuclideanSet& region, double panels_per_unit) {
  require(f.dimension() == region.dimension(), "energy_inside: dimension mismatch");
  require(region.dimension() <= 3, "energy_inside: grid quadrature needs d <= 3; use monte_carlo");
  require(region.pieces_disjoint(), "energy_inside: grid quadrature needs pairwise disjoint pieces");
  require(panels_per_unit > 0.0, "energy_inside: panels_per_unit must be positive");
  const auto atoms = flatten(f);
  const int d = f.dimension();
  const double total = f.energy();
  const double feature = feature_length(atoms, side);
  Estimate out{0.0, 0.0, 0, false};
  for (const Piece& piece : region.pieces()) {
    const int n0 = static_cast<int>(std::ceil(panels_per_unit * piece_extent(piece) / feature));
    const Estimate e = refine(
        [&](int n) { return integrate_piece(piece, n, [&](const Vec& x) { return density(atoms, side, x); }); },
        d, n0, 1e-11 * total, true, "tail_energy");
    out.value += e.value;
    out.std_error += e.std_error;
    out.trials += e.trials;
  }
  return out;
}

Estimate tail_energy(const TestFunction& f, Side side, const EuclideanSet& region, const TailOptions& options) {
  require(f.dimension() == region.dimension(), "tail_energy: dimension mismatch");
  const auto atoms = flatten(f);
  const auto closed = closed_form_tail(atoms, side, region);
  TailMethod method = options.method;
  if (method == TailMethod::automatic) {
    if (closed || region.empty())
      method = TailMethod::closed_form;
    else if (region.dimension() <= 3 && region.pieces_disjoint())
      method = TailMethod::grid;
    else
      method = TailMethod::monte_carlo;
  }
  const double total = f.energy();
  if (region.empty()) return {total, 0.0, 0, true};
  switch (method) {
    case TailMethod::closed_form:
      require(closed.has_value(), "tail_energy: closed_form needs a single Gaussian and a ball centred on its peak");
      return {closed->tail, 0.0, 0, true};
    case TailMethod::grid: {
      Estimate inside;
      try {
        inside = energy_inside(f, side, region, options.panels_per_unit);
      } catch (const PreconditionError&) {
        if (options.method == TailMethod::grid) throw;
        inside = monte_carlo_inside(atoms, side, region, options.samples, options.seed);
      }
      return {std::max(0.0, total - inside.value), inside.std_error, inside.trials, false};
    }
    case TailMethod::monte_carlo:
    case TailMethod::automatic: {
      require(options.samples >= 2, "tail_energy: samples must be >= 2");
      const Estimate inside = monte_carlo_inside(atoms, side, region, options.samples, options.seed);
      return {std::max(0.0, total - inside.value), inside.std_error, inside.trials, false};
    }
  }
  return {};
}

LalIntegrand lal_integrand(const TestFunction& f) {
  const int d = f.dimension();
  auto atoms = std::make_shared<const std::vector<Atom>>(flatten(f));
  auto value = [atoms](const Vec& x) {
    Complex s{0.0, 0.0};
    for (const Atom& a : *atoms) s += atom_value(a, x);
    return std::abs(s);
  };
  RadialMajorant env = f.space_envelope();
  const double cutoff = envelope_cutoff(env, 1e-15);
  auto outer = [atoms, d, cutoff, value](double radius) -> Estimate {
    const auto& as = *atoms;
    if (as.size() == 1 && !as.front().is_box && as.front().center.norm() == 0.0) {
      const double a = as.front().scale;
      return {std::abs(as.front().coefficient) * std::pow(a, d) *
                  boost::math::gamma_q(d / 2.0, kPi * radius * radius / (a * a)),
              0.0, 0, true};
    }
    if (radius >= cutoff) return {0.0, 0.0, 0, false};
    require(d <= 3, "lal_integrand: outer integral needs d <= 3");
    const double feature = feature_length(as, Side::space);
    const int n0 = static_cast<int>(std::ceil((cutoff - radius) / feature));
    return refine([&](int n) { return integrate_shell(Vec::Zero(d), radius, cutoff, n, value); }, d, n0, 1e-9,
                  false, "lal_integrand");
  };
  return LalIntegrand(d, "abs-test-function", value, std::move(env), outer);
}

ExpectationReport check_energy_expectation(const TestFunction& f, std::size_t trials, std::uint64_t seed,
                                           const EnergyCheckOptions& options) {
  require(trials >= 2, "check_energy_expectation: trials must be >= 2");
  const auto start = Clock::now();
  const int d = f.dimension();
  const auto values = evaluate_trials(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    return Periodization(f, RandomLattice::draw(d, rng)).coefficient_energy();
  });
  const Estimate e = mean_and_stderr(values);
  const double energy = f.energy();
  const double hat0 = std::norm(f.evaluate_hat(Vec::Zero(d)));
  ExpectationReport r;
  r.estimate = e.value;
  r.std_error = e.std_error;
  r.trials = trials;
  r.seed = seed;
  r.reference = energy;
  r.bound = 2.0 * hat0 + 2.0 * options.lal_constant * energy;
  r.extras = {{"hat0_sq", hat0}, {"energy", energy}, {"lal_constant", options.lal_constant}};
  if (const auto s = f.support()) {
    const double measure = lebesgue_measure(*s, 400000, substream_seed(seed, 0x5e7)).value;
    r.extras.emplace_back("support_measure", measure);
    r.extras.emplace_back("support_bound", 2.0 * (measure + options.lal_constant) * energy);
  }
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

ExpectationReport check_tail_coeff_expectation(const TestFunction& f, const EuclideanSet& sigma,
                                               std::size_t trials, std::uint64_t seed,
                                               const EnergyCheckOptions& options) {
  require(trials >= 2, "check_tail_coeff_expectation: trials must be >= 2");
  require(f.dimension() == sigma.dimension(), "check_tail_coeff_expectation: dimension mismatch");
  require(sigma.contains(Vec::Zero(sigma.dimension())), "check_tail_coeff_expectation: 0 must lie in sigma");
  const auto start = Clock::now();
  const int d = f.dimension();
  const auto values = evaluate_trials(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    const RandomLattice lattice = RandomLattice::draw(d, rng);
    const Periodization p(f, lattice);
    double inside = 0.0;
    for (const IntVec& m : intersect(lattice, sigma).indices) inside += std::norm(p.coefficient(m));
    return std::max(0.0, p.coefficient_energy() - inside);
  });
  const Estimate e = mean_and_stderr(values);
  TailOptions tail_options;
  tail_options.seed = substream_seed(seed, 0x7a11);
  const Estimate tail = tail_energy(f, Side::frequency, sigma, tail_options);
  ExpectationReport r;
  r.estimate = e.value;
  r.std_error = e.std_error;
  r.trials = trials;
  r.seed = seed;
  r.reference = tail.value;
  r.bound = 2.0 * options.lal_constant * tail.value;
  r.extras = {{"tail_std_error", tail.std_error}, {"energy", f.energy()}, {"lal_constant", options.lal_constant}};
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

}  // namespace ul
