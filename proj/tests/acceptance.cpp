// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "ul/annihilation.hpp"
#include "ul/turan.hpp"

using namespace ul;

namespace {

const std::string data_dir = UL_DATA_DIR;
std::string data(const std::string& name) { return data_dir + "/" + name; }

struct Verdict {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("threw: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = limit_s <= 0.0 || elapsed <= limit_s;
  const bool pass = v.ok && in_time;
  failures += !pass;
  std::printf("%s %2d %s: %s [%.1f s", pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(), elapsed);
  if (limit_s > 0.0) std::printf(" / %.0f s", limit_s);
  std::printf("%s]\n", in_time ? "" : ", over time");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

AxisBox centred_box(int d, double measure) {
  const double half = 0.5 * std::pow(measure, 1.0 / d);
  return {Vec::Constant(d, -half), Vec::Constant(d, half)};
}

Verdict turan_campaigns() {
  std::size_t bad_one_dim = 0, bad_product = 0;
  const auto one = turan_campaign(1, 1000, 1);
  for (const auto& row : one) {
    bad_one_dim += !row.holds;
    Rng rng(row.seed);
    const TrigPolynomial p = random_polynomial(1, rng);
    const TorusSet e = random_torus_set(1, rng);
    bad_product += !turan_check_multidim(p, e).holds;
  }
  const auto two = turan_campaign(2, 1000, 2);
  for (const auto& row : two) bad_product += !row.holds;
  return {bad_one_dim == 0 && bad_product == 0,
          fmt("1-D violations %g (1-D bound), %g (product bound, 1-D and 2-D)", double(bad_one_dim), double(bad_product))};
}

Verdict parseval() {
  Rng rng(2024);
  double worst = 0.0;
  for (int d = 1; d <= 3; ++d)
    for (int kind = 0; kind < 2; ++kind) {
      const TestFunction f = kind == 0 ? TestFunction::gaussian(d, 0.7) : TestFunction::box(centred_box(d, std::pow(2.0, -d - 1)));
      for (int i = 0; i < 20; ++i) {
        const Periodization p(f, RandomLattice::draw(d, rng));
        const double e = p.energy();
        worst = std::max(worst, std::abs(p.coefficient_energy() - e) / e);
      }
    }
  return {worst <= 1e-6, fmt("max relative gap %.3g (limit 1e-6)", worst)};
}

// Closed-form transforms, written out independently of the library.
Complex gaussian_hat(double scale, const Vec& xi) {
  return std::pow(scale, xi.size()) * std::exp(-oracle::pi * scale * scale * xi.squaredNorm());
}

Complex box_hat(const Vec& lower, const Vec& upper, const Vec& xi) {
  Complex out = 1.0;
  for (int a = 0; a < xi.size(); ++a) {
    if (xi[a] == 0.0) {
      out *= upper[a] - lower[a];
      continue;
    }
    const Complex i2pi(0.0, 2.0 * oracle::pi * xi[a]);
    out *= (std::exp(i2pi * upper[a]) - std::exp(i2pi * lower[a])) / i2pi;
  }
  return out;
}

Verdict coefficient_formula() {
  Rng rng(77);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + i % 3;
    const double scale = uniform(rng, 0.3, 2.0);
    const AxisBox box = centred_box(d, uniform(rng, 0.05, 0.2));
    const Vec shift = Vec::Constant(d, uniform(rng, -0.3, 0.3));
    const TestFunction f =
        i % 2 ? TestFunction::gaussian(d, scale) : TestFunction::translated(TestFunction::box(box), shift);
    const RandomLattice l = RandomLattice::draw(d, rng);
    std::vector<int> m(static_cast<std::size_t>(d));
    Vec mv(d);
    for (int a = 0; a < d; ++a) {
      m[static_cast<std::size_t>(a)] = static_cast<int>(rng() % 9) - 4;
      mv[a] = m[static_cast<std::size_t>(a)];
    }
    const Vec xi = l.v() * (l.rho().matrix().transpose() * mv);
    const Complex hat = i % 2 ? gaussian_hat(scale, xi) : box_hat(box.lower + shift, box.upper + shift, xi);
    const Complex expect = std::sqrt(l.v()) * hat;
    const Complex got = Periodization(f, l).coefficient(m);
    worst = std::max(worst, std::abs(got - expect) / std::max(std::abs(expect), 1e-300));
  }
  return {worst <= 1e-12, fmt("max relative error %.3g (limit 1e-12)", worst)};
}

Verdict support_bound() {
  Rng rng(404);
  double worst_excess = -1.0;
  bool ok = true;
  for (int d = 1; d <= 2; ++d) {
    const double s = std::pow(2.0, -d - 1);
    const TestFunction f = TestFunction::box(centred_box(d, s));
    const int n = d == 1 ? 4096 : 512;
    const double tol = 2.0 * d / n;
    for (int i = 0; i < 100; ++i) {
      const double frac = Periodization(f, RandomLattice::draw(d, rng)).support_fraction(n);
      const double excess = frac - std::pow(2.0, d) * s;
      worst_excess = std::max(worst_excess, excess);
      ok = ok && excess <= tol;
    }
  }
  return {ok, fmt("max(fraction - 2^d |S|) = %.4g, grid tolerance 2d/n", worst_excess)};
}

Verdict lal_window() {
  const LalIntegrand phi = annulus_indicator(2, 1.0, 3.0);
  bool ok = true;
  double lo = 1e300, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LalReports r = verify_lal(phi, 10000, 5000 + seed);
    for (double x : {r.dilated.ratio(), r.contracted.ratio()}) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      ok = ok && x >= 1.0 / 50 && x <= 50.0;
    }
  }
  return {ok, fmt("ratios over 5 seeds in [%.3f, %.3f], window [0.02, 50]", lo, hi)};
}

Verdict expectation_bounds() {
  const std::vector<double> radii{2, 4, 8};
  const std::size_t trials = 4000;
  auto ratios = [&](double r, std::uint64_t seed) {
    const EuclideanSet ball = make_ball_set(Vec::Zero(2), r);
    return std::pair{estimate_card(ball, trials, seed).ratio(), estimate_order(ball, trials, seed).ratio()};
  };
  // Training seeds fix the constants; disjoint test seeds must respect them.
  double c_card = 0.0, c_order = 0.0;
  for (double r : radii)
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      const auto [a, b] = ratios(r, seed);
      c_card = std::max(c_card, a);
      c_order = std::max(c_order, b);
    }
  c_card *= 1.1;
  c_order *= 1.1;
  bool ok = true;
  double spread = 0.0;
  for (double r : radii) {
    std::vector<double> card, order;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto [a, b] = ratios(r, seed);
      card.push_back(a);
      order.push_back(b);
      ok = ok && a <= c_card && b <= c_order;
    }
    for (const auto* v : {&card, &order}) {
      const double mean = std::accumulate(v->begin(), v->end(), 0.0) / 5.0;
      for (double x : *v) spread = std::max(spread, std::abs(x / mean - 1.0));
    }
  }
  ok = ok && spread <= 0.10;
  return {ok, fmt("constants card %.3f, order %.3f; max seed deviation %.1f%% (limit 10%%)", c_card, c_order, 100 * spread)};
}

Verdict sharpness() {
  std::vector<double> m;
  for (int n : {8, 16, 32}) m.push_back(sigma_n_experiment(n, 10.0 * n, 2000, 3).m.estimate);
  const double r1 = m[1] / m[0], r2 = m[2] / m[1];
  const bool ok = r1 >= 1.5 && r1 <= 2.5 && r2 >= 1.5 && r2 <= 2.5 && m[1] >= 16.0 / 8;
  return {ok, fmt("E[m] ratios %.3f, %.3f in [1.5, 2.5]; E[m] at N = 16 is %.2f (>= 2)", r1, r2, m[1])};
}

Verdict gaussian_scaling() {
  std::vector<double> r2, lr;
  for (int i = 0; i < 8; ++i) {
    const double r = 0.6 + 0.2 * i;
    const EuclideanSet ball = make_ball_set(Vec::Zero(1), r);
    r2.push_back(r * r);
    lr.push_back(std::log(observed_ratio({TestFunction::gaussian(1, 1.0), ball, ball}).ratio));
  }
  const oracle::Fit fit = oracle::linear_fit(r2, lr);
  return {fit.slope > 0.0 && fit.r2 >= 0.99, fmt("slope %.3f, R^2 %.5f", fit.slope, fit.r2)};
}

Verdict pipeline_events() {
  const AxisBox box = centred_box(2, 0.125);
  const PipelineContext ctx =
      prepare_pipeline({TestFunction::box(box), EuclideanSet(2, {box}), make_ball_set(Vec::Zero(2), 2.0)});
  const int seeds = 1000;
  const auto traces = map_items<PipelineTrace>(seeds, [&](std::size_t i) { return trace_pipeline(ctx, i); });
  int e4 = 0, all = 0, chain = 0;
  for (const auto& t : traces) {
    e4 += t.e4;
    if (t.all_events()) {
      ++all;
      chain += t.chain_holds;
    }
  }
  const bool ok = e4 == seeds && all >= seeds / 20 && chain == all;
  return {ok, fmt("e4 on %g/1000, all events on %g (>= 50), chain holds on %g of those", e4, all, chain)};
}

Verdict determinism() {
  const std::string f2 = data("box_source_2d.json"), s2 = data("box_support_2d.json"), sig = data("sigma_ball_2d.json");
  const std::vector<std::vector<std::string>> configs{
      {"lal", "--trials", "300", "--seed", "4"},
      {"lal", "--set", data("unit_ball_2d.json"), "--trials", "200", "--seed", "4", "--format", "csv"},
      {"turan", "--dim", "2", "--random", "100", "--seed", "4"},
      {"turan", "--poly", data("cosine_1d.json"), "--region", data("half_arc_1d.json")},
      {"periodize", "--function", f2, "--op", "summary", "--seed", "4"},
      {"periodize", "--function", data("gaussian_1d.json"), "--op", "values", "--grid", "64", "--format", "csv"},
      {"periodize", "--function", f2, "--op", "energy-expectation", "--trials", "50", "--seed", "4"},
      {"geometry", "--set", sig, "--op", "mean-width", "--trials", "2000", "--seed", "4"},
      {"geometry", "--set", sig, "--op", "card", "--trials", "500", "--seed", "4"},
      {"ratio", "--gaussian", "1.2", "--seed", "4"},
      {"ratio", "--function", f2, "--s", s2, "--sigma", sig, "--seed", "4"},
      {"pipeline", "--function", f2, "--s", s2, "--sigma", sig, "--trials", "5", "--seed", "4"},
      {"sweep", "--function", f2, "--s", s2, "--sigma", sig, "--grid", "2", "--seed", "4"},
      {"sharpness", "--n", "8", "--trials", "300", "--seed", "4"},
  };
  int mismatched = 0, failed = 0;
  std::string first_bad;
  for (const auto& args : configs) {
    std::string payload[2];
    for (int rep = 0; rep < 2; ++rep) {
      std::ostringstream out, err;
      failed += cli::run_cli(args, out, err) != cli::kOk;
      payload[rep] = cli::strip_timing(out.str());
    }
    if (payload[0] != payload[1] || payload[0].empty()) {
      ++mismatched;
      if (first_bad.empty()) first_bad = args[0];
    }
  }
  return {mismatched == 0 && failed == 0,
          fmt("%g configs over 8 subcommands, %g differing, %g nonzero exits", double(configs.size()), mismatched,
              failed) + (first_bad.empty() ? "" : " (first: " + first_bad + ")")};
}

}  // namespace

int main() {
  criterion(1, "Turan campaigns", 60, turan_campaigns);
  criterion(2, "Periodization Parseval", 30, parseval);
  criterion(3, "Coefficient formula", 5, coefficient_formula);
  criterion(4, "Support bound", 60, support_bound);
  criterion(5, "Lattice averaging window", 120, lal_window);
  criterion(6, "Expectation bounds", 300, expectation_bounds);
  criterion(7, "Sigma_N sharpness", 300, sharpness);
  criterion(8, "Gaussian scaling", 10, gaussian_scaling);
  criterion(9, "Pipeline events", 600, pipeline_events);
  criterion(10, "Determinism", 0, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures ? 1 : 0;
}
