#include "ul/turan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "ul/detail/enumerate.hpp"
#include "ul/errors.hpp"

namespace ul {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

TrigPolynomial::TrigPolynomial(int dimension, Terms terms) : dimension_(dimension) {
  require(dimension >= 1, "TrigPolynomial: dimension must be >= 1");
  for (auto& [k, c] : terms) {
    require(static_cast<int>(k.size()) == dimension, "TrigPolynomial: frequency dimension mismatch");
    if (c != std::complex<double>{0.0, 0.0}) terms_.emplace(k, c);
  }
  require(!terms_.empty(), "TrigPolynomial: at least one nonzero coefficient required");
}

std::complex<double> TrigPolynomial::evaluate(const Vec& t) const {
  require(t.size() == dimension_, "TrigPolynomial::evaluate: dimension mismatch");
  std::complex<double> s{0.0, 0.0};
  for (const auto& [k, c] : terms_) {
    double arg = 0.0;
    for (int i = 0; i < dimension_; ++i) arg += k[static_cast<std::size_t>(i)] * t[i];
    arg -= std::floor(arg);
    s += c * std::complex<double>(std::cos(kTwoPi * arg), std::sin(kTwoPi * arg));
  }
  return s;
}

int TrigPolynomial::max_abs_frequency() const {
  int m = 0;
  for (const auto& [k, c] : terms_)
    for (int ki : k) m = std::max(m, std::abs(ki));
  return m;
}

double TrigPolynomial::gradient_bound() const {
  double g = 0.0;
  for (const auto& [k, c] : terms_) {
    double n2 = 0.0;
    for (int ki : k) n2 += static_cast<double>(ki) * ki;
    g += std::abs(c) * std::sqrt(n2);
  }
  return kTwoPi * g;
}

PolyOrder poly_order(const TrigPolynomial& p) {
  const int d = p.dimension();
  PolyOrder o;
  o.term_count = static_cast<int>(p.size());
  for (int i = 0; i < d; ++i) {
    std::set<int> values;
    for (const auto& [k, c] : p.terms()) values.insert(k[static_cast<std::size_t>(i)]);
    o.per_axis.push_back(static_cast<int>(values.size()) - 1);
    o.set_order += static_cast<int>(values.size());
  }
  o.fm_exponent = o.set_order - d;
  return o;
}

// ---------------------------------------------------------------------------

TorusSet::TorusSet(int dimension, std::vector<AxisBox> boxes) : dimension_(dimension), boxes_(std::move(boxes)) {
  require(dimension >= 1, "TorusSet: dimension must be >= 1");
  for (const AxisBox& b : boxes_) {
    require(b.lower.size() == dimension && b.upper.size() == dimension, "TorusSet: box dimension mismatch");
    require((b.lower.array() >= 0.0).all() && (b.upper.array() <= 1.0).all(),
            "TorusSet: boxes must lie in the fundamental domain [0,1]^d");
    require((b.lower.array() < b.upper.array()).all(), "TorusSet: lower < upper required");
  }
}

TorusSet TorusSet::full(int dimension) {
  return TorusSet(dimension, {AxisBox{Vec::Zero(dimension), Vec::Ones(dimension)}});
}

TorusSet TorusSet::arcs(const std::vector<std::pair<double, double>>& start_length) {
  std::vector<AxisBox> boxes;
  for (const auto& [start, length] : start_length) {
    require(length > 0.0, "TorusSet::arcs: arc length must be positive");
    if (length >= 1.0) return full(1);
    const double a = start - std::floor(start);
    const double b = a + length;
    if (b <= 1.0) {
      boxes.push_back({Vec::Constant(1, a), Vec::Constant(1, b)});
    } else {
      boxes.push_back({Vec::Constant(1, a), Vec::Constant(1, 1.0)});
      boxes.push_back({Vec::Constant(1, 0.0), Vec::Constant(1, b - 1.0)});
    }
  }
  return TorusSet(1, std::move(boxes));
}

TorusSet TorusSet::wrapped_box(const Vec& lower, const Vec& sides) {
  const auto d = static_cast<int>(lower.size());
  require(sides.size() == d, "TorusSet::wrapped_box: dimension mismatch");
  std::vector<std::vector<std::pair<double, double>>> axis(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    require(sides[i] > 0.0, "TorusSet::wrapped_box: sides must be positive");
    auto& parts = axis[static_cast<std::size_t>(i)];
    if (sides[i] >= 1.0) {
      parts.emplace_back(0.0, 1.0);
      continue;
    }
    const double a = lower[i] - std::floor(lower[i]);
    const double b = a + sides[i];
    if (b <= 1.0) {
      parts.emplace_back(a, b);
    } else {
      parts.emplace_back(a, 1.0);
      parts.emplace_back(0.0, b - 1.0);
    }
  }
  std::vector<AxisBox> boxes;
  std::vector<int> lo(static_cast<std::size_t>(d), 0), hi(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) hi[static_cast<std::size_t>(i)] = static_cast<int>(axis[static_cast<std::size_t>(i)].size()) - 1;
  detail::for_each_in_cube(lo, hi, [&](const std::vector<int>& idx) {
    AxisBox b{Vec(d), Vec(d)};
    for (int i = 0; i < d; ++i) {
      const auto& part = axis[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      b.lower[i] = part.first;
      b.upper[i] = part.second;
    }
    boxes.push_back(std::move(b));
  });
  return TorusSet(d, std::move(boxes));
}

bool TorusSet::contains(const Vec& t) const {
  for (const AxisBox& b : boxes_)
    if ((t.array() >= b.lower.array()).all() && (t.array() <= b.upper.array()).all()) return true;
  return false;
}

double TorusSet::measure() const {
  if (boxes_.empty()) return 0.0;
  const int d = dimension_;
  std::vector<std::vector<double>> cuts(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    auto& c = cuts[static_cast<std::size_t>(i)];
    for (const AxisBox& b : boxes_) {
      c.push_back(b.lower[i]);
      c.push_back(b.upper[i]);
    }
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  std::vector<int> lo(static_cast<std::size_t>(d), 0), hi(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) hi[static_cast<std::size_t>(i)] = static_cast<int>(cuts[static_cast<std::size_t>(i)].size()) - 2;
  double total = 0.0;
  Vec mid(d);
  detail::for_each_in_cube(lo, hi, [&](const std::vector<int>& idx) {
    double vol = 1.0;
    for (int i = 0; i < d; ++i) {
      const auto& c = cuts[static_cast<std::size_t>(i)];
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      mid[i] = 0.5 * (c[j] + c[j + 1]);
      vol *= c[j + 1] - c[j];
    }
    if (contains(mid)) total += vol;
  });
  return total;
}

TorusSet TorusSet::united(const TorusSet& other) const {
  require(other.dimension_ == dimension_, "TorusSet::united: dimension mismatch");
  auto boxes = boxes_;
  boxes.insert(boxes.end(), other.boxes_.begin(), other.boxes_.end());
  return TorusSet(dimension_, std::move(boxes));
}

// ---------------------------------------------------------------------------

namespace {

// Maximise |P| along one axis inside [lo, hi] by golden-section steps.
double golden_axis(const TrigPolynomial& p, Vec& t, int axis, double lo, double hi, int steps) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  auto value_at = [&](double x) {
    Vec s = t;
    s[axis] = x;
    return std::abs(p.evaluate(s));
  };
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = value_at(x1), f2 = value_at(x2);
  for (int i = 0; i < steps; ++i) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = value_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = value_at(x2);
    }
  }
  const double best_x = f1 > f2 ? x1 : x2;
  const double best = std::max(f1, f2);
  if (best > std::abs(p.evaluate(t))) t[axis] = best_x;
  return std::abs(p.evaluate(t));
}

}  // namespace

SupNorm sup_norm(const TrigPolynomial& p, const TorusSet& region) {
  require(p.dimension() == region.dimension(), "sup_norm: dimension mismatch");
  require(region.measure() > 0.0, "sup_norm: region must have positive measure");
  const int d = p.dimension();
  const double h_target = 1.0 / (8.0 * (p.max_abs_frequency() + 1));
  double best = -1.0;
  double spacing = 0.0;
  Vec best_t(d);
  AxisBox best_box;
  std::vector<double> steps(static_cast<std::size_t>(d));
  for (const AxisBox& b : region.boxes()) {
    std::vector<int> lo(static_cast<std::size_t>(d), 0), hi(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      const double len = b.upper[i] - b.lower[i];
      const int n = std::max(1, static_cast<int>(std::ceil(len / h_target)));
      hi[static_cast<std::size_t>(i)] = n;
      steps[static_cast<std::size_t>(i)] = len / n;
      spacing = std::max(spacing, len / n);
    }
    Vec t(d);
    detail::for_each_in_cube(lo, hi, [&](const std::vector<int>& idx) {
      for (int i = 0; i < d; ++i) t[i] = b.lower[i] + idx[static_cast<std::size_t>(i)] * steps[static_cast<std::size_t>(i)];
      const double v = std::abs(p.evaluate(t));
      if (v > best) {
        best = v;
        best_t = t;
        best_box = b;
      }
    });
  }
  for (int i = 0; i < d; ++i) {
    const double lo = std::max(best_box.lower[i], best_t[i] - spacing);
    const double hi = std::min(best_box.upper[i], best_t[i] + spacing);
    if (hi > lo) best = std::max(best, golden_axis(p, best_t, i, lo, hi, 3));
  }
  SupNorm out;
  out.value = best;
  out.spacing = spacing;
  out.upper = best + p.gradient_bound() * std::sqrt(static_cast<double>(d)) * spacing / 2.0;
  return out;
}

namespace {

TuranCheck turan_check(const TrigPolynomial& p, const TorusSet& e, double factor) {
  TuranCheck c;
  const SupNorm whole = sup_norm(p, TorusSet::full(p.dimension()));
  const SupNorm on_e = sup_norm(p, e);
  c.lhs = whole.value;
  c.lhs_upper = whole.upper;
  c.sup_e = on_e.value;
  c.sup_e_upper = on_e.upper;
  c.factor = factor;
  c.measure = e.measure();
  c.rhs = factor * on_e.value;
  c.holds = c.lhs <= factor * on_e.upper;
  return c;
}

}  // namespace

TuranCheck turan_check_1d(const TrigPolynomial& p, const TorusSet& e) {
  require(p.dimension() == 1, "turan_check_1d: polynomial must be one-dimensional");
  require(e.dimension() == 1, "turan_check_1d: E must be one-dimensional");
  const double measure = e.measure();
  require(measure > 0.0, "turan_check_1d: E must have positive measure");
  const int m = poly_order(p).term_count;
  return turan_check(p, e, std::pow(14.0 / measure, m - 1));
}

TuranCheck turan_check_multidim(const TrigPolynomial& p, const TorusSet& e) {
  require(p.dimension() == e.dimension(), "turan_check_multidim: dimension mismatch");
  const double measure = e.measure();
  require(measure > 0.0, "turan_check_multidim: E must have positive measure");
  const int d = p.dimension();
  return turan_check(p, e, std::pow(14.0 * d / measure, poly_order(p).fm_exponent));
}

// ---------------------------------------------------------------------------

namespace {

std::complex<double> random_coefficient(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(rng), n(rng)};
}

std::vector<int> distinct_values(Rng& rng, int count, int lo, int hi) {
  std::vector<int> pool;
  for (int v = lo; v <= hi; ++v) pool.push_back(v);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

TrigPolynomial random_polynomial(int d, Rng& rng) {
  TrigPolynomial::Terms terms;
  if (d == 1) {
    const int count = uniform_int(rng, 1, 8);
    for (int k : distinct_values(rng, count, -20, 20)) terms[{k}] = random_coefficient(rng);
    return TrigPolynomial(1, std::move(terms));
  }
  require(d == 2, "random_polynomial: only d = 1 and d = 2 are generated");
  const auto xs = distinct_values(rng, uniform_int(rng, 1, 3), -5, 5);
  const auto ys = distinct_values(rng, uniform_int(rng, 1, 3), -5, 5);
  std::bernoulli_distribution keep(0.7);
  for (int x : xs)
    for (int y : ys)
      if (keep(rng)) terms[{x, y}] = random_coefficient(rng);
  if (terms.empty()) terms[{xs.front(), ys.front()}] = random_coefficient(rng);
  return TrigPolynomial(2, std::move(terms));
}

TorusSet random_torus_set(int d, Rng& rng) {
  if (d == 1) {
    while (true) {
      std::vector<std::pair<double, double>> arcs;
      const int count = uniform_int(rng, 1, 4);
      for (int i = 0; i < count; ++i) arcs.emplace_back(uniform(rng, 0.0, 1.0), uniform(rng, 0.01, 0.3));
      TorusSet e = TorusSet::arcs(arcs);
      if (e.measure() >= 0.1) return e;
    }
  }
  require(d == 2, "random_torus_set: only d = 1 and d = 2 are generated");
  while (true) {
    std::vector<AxisBox> boxes;
    const int count = uniform_int(rng, 1, 3);
    for (int i = 0; i < count; ++i) {
      Vec lower(2), sides(2);
      for (int k = 0; k < 2; ++k) {
        lower[k] = uniform(rng, 0.0, 1.0);
        sides[k] = uniform(rng, 0.05, 0.6);
      }
      const TorusSet piece = TorusSet::wrapped_box(lower, sides);
      boxes.insert(boxes.end(), piece.boxes().begin(), piece.boxes().end());
    }
    TorusSet e(2, std::move(boxes));
    if (e.measure() >= 0.05) return e;
  }
}

std::vector<CampaignRow> turan_campaign(int d, std::size_t count, std::uint64_t seed) {
  require(d == 1 || d == 2, "turan_campaign: d must be 1 or 2");
  return map_items<CampaignRow>(count, [&](std::size_t i) {
    CampaignRow row;
    row.seed = substream_seed(seed, i);
    Rng rng(row.seed);
    const TrigPolynomial p = random_polynomial(d, rng);
    const TorusSet e = random_torus_set(d, rng);
    const TuranCheck c = d == 1 ? turan_check_1d(p, e) : turan_check_multidim(p, e);
    row.lhs = c.lhs;
    row.rhs = c.rhs;
    row.factor = c.factor;
    row.holds = c.holds;
    return row;
  });
}

}  // namespace ul
