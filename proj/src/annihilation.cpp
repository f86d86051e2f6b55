#include "ul/annihilation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "ul/errors.hpp"

namespace ul {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

TheoremBound theorem_bound(const EuclideanSet& s, const EuclideanSet& sigma, double c,
                           const GeometryOptions& options) {
  require(c > 0.0 && std::isfinite(c), "theorem_bound: C must be positive");
  require(s.dimension() == sigma.dimension(), "theorem_bound: dimension mismatch");
  require(!s.empty() && !sigma.empty(), "theorem_bound: sets must be nonempty and bounded");
  const double d = s.dimension();
  const double ms = lebesgue_measure(s, options.measure_trials, substream_seed(options.seed, 1)).value;
  const double msig = lebesgue_measure(sigma, options.measure_trials, substream_seed(options.seed, 2)).value;
  const double ws = mean_width(s, options.width_trials, substream_seed(options.seed, 3)).value;
  const double wsig = mean_width(sigma, options.width_trials, substream_seed(options.seed, 4)).value;
  TheoremBound b;
  b.terms = {ms * msig, std::pow(ms, 1.0 / d) * wsig, ws * std::pow(msig, 1.0 / d)};
  b.argmin = static_cast<int>(std::min_element(b.terms.begin(), b.terms.end()) - b.terms.begin());
  static const char* names[] = {"measure_product", "space_measure_frequency_width",
                                "space_width_frequency_measure"};
  b.argmin_name = names[b.argmin];
  b.exponent = c * b.terms[static_cast<std::size_t>(b.argmin)];
  b.value = c * std::exp(b.exponent);
  return b;
}

ObservedRatio observed_ratio(const AnnihilationInstance& inst, const TailOptions& options) {
  require(inst.f.dimension() == inst.s.dimension() && inst.s.dimension() == inst.sigma.dimension(),
          "observed_ratio: dimension mismatch");
  ObservedRatio r;
  r.numerator = inst.f.energy();
  r.space_tail = tail_energy(inst.f, Side::space, inst.s, options).value;
  TailOptions freq = options;
  freq.seed = substream_seed(options.seed, 1);
  r.frequency_tail = tail_energy(inst.f, Side::frequency, inst.sigma, freq).value;
  r.denominator = r.space_tail + r.frequency_tail;
  if (r.space_tail < 1e-14 * r.numerator && r.frequency_tail < 1e-14 * r.numerator) {
    r.annihilated = true;
    r.ratio = std::numeric_limits<double>::infinity();
    spdlog::warn("observed_ratio: both tails below 1e-14 of the energy; reporting an infinite ratio");
  } else {
    r.ratio = r.numerator / r.denominator;
  }
  return r;
}

AnnihilationInstance scaling_reduction(const AnnihilationInstance& inst, std::size_t measure_trials,
                                       std::uint64_t seed) {
  const int d = inst.f.dimension();
  const double target = std::pow(2.0, -d - 1);
  const double measure = lebesgue_measure(inst.s, measure_trials, seed).value;
  require(measure > 0.0, "scaling_reduction: S must have positive measure");
  if (measure <= target * (1.0 + 1e-12)) return inst;
  const double lambda = std::pow(measure / target, 1.0 / d);
  return {inst.f.scaled(lambda), inst.s.scaled(1.0 / lambda), inst.sigma.scaled(lambda), inst.scale * lambda};
}

namespace {

void require_support_inside(const TestFunction& f, const EuclideanSet& s, std::uint64_t seed) {
  const auto support = f.support();
  require(support.has_value(), "pipeline: f must have compact support");
  const int d = f.dimension();
  std::size_t index = 0;
  for (const Piece& piece : support->pieces()) {
    Rng rng = make_stream(seed, index++);
    const Ball cb = circumscribed_ball(piece);
    Vec x(d);
    for (int sample = 0; sample < 4096; ++sample) {
      for (int i = 0; i < d; ++i) x[i] = uniform(rng, cb.center[i] - cb.radius, cb.center[i] + cb.radius);
      if (piece_contains(piece, x))
        require(s.contains(x), "pipeline: f must vanish outside S (support not contained in S)");
    }
  }
}

}  // namespace

PipelineContext prepare_pipeline(const AnnihilationInstance& inst, const PipelineOptions& options) {
  const int d = inst.f.dimension();
  require(inst.s.dimension() == d && inst.sigma.dimension() == d, "pipeline: dimension mismatch");
  require(inst.sigma.contains(Vec::Zero(d)), "pipeline: 0 must lie in sigma");
  require(options.lal_constant > 0.0, "pipeline: lal_constant must be positive");
  PipelineContext ctx{.instance = scaling_reduction(inst, options.geometry.measure_trials, options.geometry.seed),
                      .options = options};
  const auto& reduced = ctx.instance;
  require_support_inside(reduced.f, reduced.s, substream_seed(options.geometry.seed, 11));
  ctx.s_measure = lebesgue_measure(reduced.s, options.geometry.measure_trials, options.geometry.seed).value;
  TailOptions tail_options;
  tail_options.seed = substream_seed(options.geometry.seed, 12);
  ctx.tail = tail_energy(reduced.f, Side::frequency, reduced.sigma, tail_options).value;
  ctx.energy = reduced.f.energy();
  ctx.hat0_sq = std::norm(reduced.f.evaluate_hat(Vec::Zero(d)));
  ctx.mu_upper = mu_upper(reduced.sigma).value;
  ctx.mean_width = mean_width(reduced.sigma, options.geometry.width_trials, substream_seed(options.geometry.seed, 13)).value;
  ctx.nu = std::min(ctx.mu_upper, ctx.mean_width);
  ctx.grid_n = options.grid_n > 0 ? options.grid_n : (d <= 2 ? 512 : 64);
  return ctx;
}

PipelineTrace trace_pipeline(const PipelineContext& ctx, std::uint64_t seed) {
  const auto& inst = ctx.instance;
  const int d = inst.f.dimension();
  const double c_ref = ctx.options.lal_constant;
  Rng rng = make_stream(seed, 0);
  PipelineTrace tr;
  tr.seed = seed;
  tr.lattice = RandomLattice::draw(d, rng);
  const Periodization gamma(inst.f, tr.lattice);

  tr.m = intersect(tr.lattice, inst.sigma);
  const IntVec zero(static_cast<std::size_t>(d), 0);
  if (!tr.m.contains(zero)) {
    tr.m.indices.push_back(zero);
    std::sort(tr.m.indices.begin(), tr.m.indices.end());
  }
  for (const IntVec& m : tr.m.indices) {
    tr.p_coefficients.push_back(gamma.coefficient(m));
    tr.p_energy += std::norm(tr.p_coefficients.back());
  }
  tr.total_energy = gamma.coefficient_energy();
  tr.spatial_energy = gamma.energy();
  tr.r_energy = std::max(0.0, tr.total_energy - tr.p_energy);
  tr.partition_gap = std::abs(tr.p_energy + tr.r_energy - tr.spatial_energy) / tr.spatial_energy;
  tr.order = order_of(tr.m);
  tr.fm_exponent = tr.order - d;
  tr.tail = ctx.tail;
  tr.hat0_sq = ctx.hat0_sq;
  tr.p_hat0_sq = std::norm(gamma.coefficient(zero));

  tr.e1 = tr.r_energy <= 4.0 * c_ref * ctx.tail;
  tr.e2 = tr.order <= 2.0 * (c_ref * ctx.nu + d);
  tr.e4 = tr.hat0_sq <= tr.p_hat0_sq;
  if (!tr.e4) throw AssertionFailure("pipeline: |f^(0)|^2 exceeded |P^(0)|^2");

  // E: zeros of Gamma on the torus grid. On E, P = -R, so E~ keeps the
  // points where |P| stays below the threshold.
  const int n = ctx.grid_n;
  const auto mask = gamma.support_mask(n);
  tr.threshold = 4.0 * std::sqrt(c_ref * ctx.tail);

  // Per-axis phase tables exp(-2 i pi m_i t_i) for t_i = (g + 1/2) / n.
  std::vector<std::vector<std::vector<std::complex<double>>>> tables(static_cast<std::size_t>(d));
  std::vector<std::vector<std::size_t>> slot(tr.m.size(), std::vector<std::size_t>(static_cast<std::size_t>(d)));
  for (int i = 0; i < d; ++i) {
    std::vector<int> values;
    for (const IntVec& m : tr.m.indices) values.push_back(m[static_cast<std::size_t>(i)]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    auto& table = tables[static_cast<std::size_t>(i)];
    for (int value : values) {
      std::vector<std::complex<double>> row(static_cast<std::size_t>(n));
      for (int g = 0; g < n; ++g) {
        double arg = value * (g + 0.5) / n;
        arg -= std::floor(arg);
        row[static_cast<std::size_t>(g)] = {std::cos(kTwoPi * arg), -std::sin(kTwoPi * arg)};
      }
      table.push_back(std::move(row));
    }
    for (std::size_t j = 0; j < tr.m.size(); ++j)
      slot[j][static_cast<std::size_t>(i)] = static_cast<std::size_t>(
          std::lower_bound(values.begin(), values.end(), tr.m.indices[j][static_cast<std::size_t>(i)]) - values.begin());
  }
  std::size_t zeros = 0, kept = 0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d));
  for (std::size_t flat = 0; flat < mask.size(); ++flat) {
    if (mask[flat]) continue;
    ++zeros;
    std::size_t rest = flat;
    for (int i = 0; i < d; ++i) {
      idx[static_cast<std::size_t>(i)] = rest % static_cast<std::size_t>(n);
      rest /= static_cast<std::size_t>(n);
    }
    std::complex<double> p{0.0, 0.0};
    for (std::size_t j = 0; j < tr.m.size(); ++j) {
      std::complex<double> term = tr.p_coefficients[j];
      for (int i = 0; i < d; ++i)
        term *= tables[static_cast<std::size_t>(i)][slot[j][static_cast<std::size_t>(i)]][idx[static_cast<std::size_t>(i)]];
      p += term;
    }
    const double a = std::abs(p);
    if (a <= tr.threshold) {
      ++kept;
      tr.sup_p_e_tilde = std::max(tr.sup_p_e_tilde, a);
    }
  }
  tr.e_measure = static_cast<double>(zeros) / static_cast<double>(mask.size());
  tr.e_tilde_measure = static_cast<double>(kept) / static_cast<double>(mask.size());
  tr.e3 = tr.e_measure >= 0.5;

  TrigPolynomial::Terms terms;
  for (std::size_t j = 0; j < tr.m.size(); ++j) {
    IntVec k = tr.m.indices[j];
    for (int& ki : k) ki = -ki;
    terms[k] = tr.p_coefficients[j];
  }
  bool nonzero = false;
  for (const auto& [k, c] : terms) nonzero = nonzero || c != std::complex<double>{0.0, 0.0};
  if (nonzero) tr.sup_p = sup_norm(TrigPolynomial(d, std::move(terms)), TorusSet::full(d)).value;

  const double chain_root = std::pow(14.0 * d / 0.25, tr.fm_exponent) * tr.threshold;
  tr.chain_value = chain_root * chain_root;
  tr.chain_holds = tr.hat0_sq <= tr.chain_value;
  if (tr.e_tilde_measure > 0.0) {
    const double measured_root = std::pow(14.0 * d / tr.e_tilde_measure, tr.fm_exponent) * tr.sup_p_e_tilde;
    tr.measured_chain_value = measured_root * measured_root;
    tr.measured_chain_holds = tr.hat0_sq <= tr.measured_chain_value;
  }
  return tr;
}

PipelineTrace pipeline_trace(const AnnihilationInstance& inst, std::uint64_t seed, const PipelineOptions& options) {
  return trace_pipeline(prepare_pipeline(inst, options), seed);
}

SweepResult translated_sweep(const AnnihilationInstance& inst, std::uint64_t seed, const SweepOptions& options) {
  require(options.grid_per_axis >= 1, "translated_sweep: grid_per_axis must be >= 1");
  require(options.max_attempts >= 1, "translated_sweep: max_attempts must be >= 1");
  const auto start = Clock::now();
  const AnnihilationInstance reduced =
      scaling_reduction(inst, options.pipeline.geometry.measure_trials, options.pipeline.geometry.seed);
  const int d = reduced.f.dimension();
  const auto [lo, hi] = reduced.sigma.bounding_box();
  const int n = options.grid_per_axis;
  std::vector<Vec> ys;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = lo[i] + (idx[static_cast<std::size_t>(i)] + 0.5) * (hi[i] - lo[i]) / n;
    // Snap the grid centre to 0 exactly so that y = 0 reproduces the plain trace.
    for (int i = 0; i < d; ++i)
      if (std::abs(y[i]) < 1e-12 * (hi[i] - lo[i])) y[i] = 0.0;
    if (reduced.sigma.contains(y)) ys.push_back(y);
    int axis = 0;
    while (axis < d && ++idx[static_cast<std::size_t>(axis)] >= n) idx[static_cast<std::size_t>(axis++)] = 0;
    if (axis == d) break;
  }

  SweepResult out;
  out.scale = reduced.scale;
  out.points = map_items<SweepPoint>(ys.size(), [&](std::size_t j) {
    const Vec& y = ys[j];
    AnnihilationInstance shifted{TestFunction::modulated(reduced.f, y), reduced.s, reduced.sigma.translated(-y),
                                 reduced.scale};
    const PipelineContext ctx = prepare_pipeline(shifted, options.pipeline);
    SweepPoint p;
    p.y = y;
    p.direct = ctx.hat0_sq;
    p.bound = std::numeric_limits<double>::quiet_NaN();
    for (int a = 0; a < options.max_attempts; ++a) {
      const PipelineTrace tr = trace_pipeline(ctx, seed + static_cast<std::uint64_t>(a));
      p.attempts = a + 1;
      if (tr.all_events()) {
        p.bound = tr.chain_value;
        p.seed = tr.seed;
        break;
      }
    }
    return p;
  });
  for (const SweepPoint& p : out.points)
    if (!std::isnan(p.bound)) out.max_bound = std::max(out.max_bound, p.bound);
  out.sigma_measure = lebesgue_measure(reduced.sigma, options.pipeline.geometry.measure_trials,
                                       options.pipeline.geometry.seed).value;
  out.aggregate = out.sigma_measure * out.max_bound;
  out.direct_integral = energy_inside(reduced.f, Side::frequency, reduced.sigma).value;
  spdlog::debug("translated_sweep: {} points in {:.1f} ms", out.points.size(), elapsed_ms(start));
  return out;
}

EuclideanSet sigma_n(int n, double radius) {
  require(n >= 1, "sigma_n: N must be >= 1");
  std::vector<Piece> discs;
  for (int j = 0; j < n; ++j) {
    const double angle = kTwoPi * j / n;
    Vec c(2);
    c << radius * std::cos(angle), radius * std::sin(angle);
    discs.push_back(Ball{c, 0.5});
  }
  return EuclideanSet(2, std::move(discs));
}

SharpnessReport sigma_n_experiment(int n, double radius, std::size_t trials, std::uint64_t seed) {
  require(n >= 1, "sigma_n_experiment: N must be >= 1");
  require(radius > 2.0 * n, "sigma_n_experiment: R must exceed 2N so the discs stay well separated");
  require(trials >= 2, "sigma_n_experiment: trials must be >= 2");
  const auto start = Clock::now();
  const EuclideanSet set = sigma_n(n, radius);
  const auto pairs = map_items<std::pair<double, double>>(trials, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    const RandomLattice lattice = RandomLattice::draw(2, rng);
    const int k_range = static_cast<int>(std::ceil(set.bounding_radius() / lattice.v()));
    return std::pair<double, double>{static_cast<double>(m_function(lattice, set, k_range)),
                                     static_cast<double>(intersect(lattice, set).size())};
  });
  std::vector<double> ms(trials), cards(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    ms[t] = pairs[t].first;
    cards[t] = pairs[t].second;
  }
  SharpnessReport r;
  r.n = n;
  r.radius = radius;
  auto fill = [&](ExpectationReport& rep, const std::vector<double>& values) {
    const Estimate e = mean_and_stderr(values);
    rep.estimate = e.value;
    rep.std_error = e.std_error;
    rep.trials = trials;
    rep.seed = seed;
  };
  fill(r.m, ms);
  fill(r.card, cards);
  r.sigma_measure = lebesgue_measure(set, 1000, seed).value;
  r.mean_width = mean_width(set, 20000, substream_seed(seed, 0x3d7));
  r.mu_upper = mu_upper(set).value;
  r.m.reference = r.mean_width.value;
  r.m.bound = kLatticeAveragingConstant * r.mean_width.value;
  r.card.reference = r.sigma_measure;
  r.card.bound = kLatticeAveragingConstant * r.sigma_measure;
  r.m.wall_time_ms = r.card.wall_time_ms = elapsed_ms(start);
  return r;
}

}  // namespace ul
