#pragma once

// Annihilating-pair machinery: the theorem's bound shape, observed energy
// ratios, a trace of the periodization argument on concrete instances, the
// translated sweep over the frequency set and the Sigma_N experiment.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ul/analysis.hpp"
#include "ul/turan.hpp"

namespace ul {

struct AnnihilationInstance {
  TestFunction f;
  // Reference set for the space side, and the frequency set.
  EuclideanSet s;
  EuclideanSet sigma;
  // Dilation applied by the scaling reduction (1 when none).
  double scale = 1.0;
};

struct TheoremBound {
  double value = 0.0;
  double exponent = 0.0;
  // |S||Sigma|, |S|^{1/d} w(Sigma), w(S) |Sigma|^{1/d}.
  std::array<double, 3> terms{};
  int argmin = 0;
  std::string argmin_name;
};

struct GeometryOptions {
  std::size_t measure_trials = 400000;
  std::size_t width_trials = 20000;
  std::uint64_t seed = 0;
};

// C exp(C min(terms)).
TheoremBound theorem_bound(const EuclideanSet& s, const EuclideanSet& sigma, double c,
                           const GeometryOptions& options = {});

struct ObservedRatio {
  double numerator = 0.0;
  double space_tail = 0.0;
  double frequency_tail = 0.0;
  double denominator = 0.0;
  // +infinity when both tails are below 1e-14 numerator.
  double ratio = 0.0;
  bool annihilated = false;
};

ObservedRatio observed_ratio(const AnnihilationInstance& inst, const TailOptions& options = {});

// Maps (f, S, Sigma) to (f(lambda .), S / lambda, lambda Sigma) with
// |S / lambda| = 2^{-d-1} when |S| is larger; identity otherwise.
AnnihilationInstance scaling_reduction(const AnnihilationInstance& inst, std::size_t measure_trials = 400000,
                                       std::uint64_t seed = 0);

struct PipelineOptions {
  double lal_constant = kLatticeAveragingConstant;
  // Torus grid for the zero set E; 0 picks 512 per axis for d <= 2 and 64 for d = 3.
  int grid_n = 0;
  GeometryOptions geometry;
};

// Seed-independent quantities shared by every trace of one instance.
struct PipelineContext {
  AnnihilationInstance instance;  // after the scaling reduction
  double s_measure = 0.0;
  double tail = 0.0;
  double energy = 0.0;
  double hat0_sq = 0.0;
  double mu_upper = 0.0;
  double mean_width = 0.0;
  double nu = 0.0;
  int grid_n = 0;
  PipelineOptions options;
};

PipelineContext prepare_pipeline(const AnnihilationInstance& inst, const PipelineOptions& options = {});

struct PipelineTrace {
  std::uint64_t seed = 0;
  RandomLattice lattice{Rotation::identity(1), 1.5};
  LatticePointSet m;
  std::vector<std::complex<double>> p_coefficients;  // aligned with m.indices
  int order = 0;
  int fm_exponent = 0;
  double total_energy = 0.0;    // sum over all m of |coefficient|^2
  double spatial_energy = 0.0;  // int_T |Gamma|^2
  double p_energy = 0.0;
  double r_energy = 0.0;
  double partition_gap = 0.0;
  double tail = 0.0;
  double e_measure = 0.0;
  double e_tilde_measure = 0.0;
  double threshold = 0.0;
  double sup_p = 0.0;
  double sup_p_e_tilde = 0.0;
  double hat0_sq = 0.0;
  double p_hat0_sq = 0.0;
  bool e1 = false, e2 = false, e3 = false, e4 = false;
  bool all_events() const { return e1 && e2 && e3 && e4; }
  // [(14 d / (1/4))^{fm_exponent} * threshold]^2 and whether |f^(0)|^2 stays below it.
  double chain_value = 0.0;
  bool chain_holds = false;
  // Same chain with the measured |E~| and sup over E~ in place of 1/4 and the threshold.
  double measured_chain_value = 0.0;
  bool measured_chain_holds = false;
};

PipelineTrace trace_pipeline(const PipelineContext& ctx, std::uint64_t seed);
PipelineTrace pipeline_trace(const AnnihilationInstance& inst, std::uint64_t seed,
                             const PipelineOptions& options = {});

struct SweepPoint {
  Vec y;
  double bound = 0.0;  // chain bound on |f^(y)|^2, NaN when no attempt fired every event
  double direct = 0.0;  // |f^(y)|^2
  std::uint64_t seed = 0;
  int attempts = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double sigma_measure = 0.0;
  double max_bound = 0.0;
  // |Sigma| * max_bound, against int_Sigma |f^|^2 by quadrature.
  double aggregate = 0.0;
  double direct_integral = 0.0;
  double scale = 1.0;
};

struct SweepOptions {
  int grid_per_axis = 5;
  int max_attempts = 64;
  PipelineOptions pipeline;
};

// Runs the trace on (f modulated by y, Sigma - y) for y on a cell-centred grid
// over Sigma's bounding box (points of Sigma only). Works on the reduced instance.
SweepResult translated_sweep(const AnnihilationInstance& inst, std::uint64_t seed, const SweepOptions& options = {});

// N discs of radius 1/2 centred at R (cos 2 pi j / N, sin 2 pi j / N).
EuclideanSet sigma_n(int n, double radius);

struct SharpnessReport {
  int n = 0;
  double radius = 0.0;
  ExpectationReport m;
  ExpectationReport card;
  double sigma_measure = 0.0;
  Estimate mean_width;
  double mu_upper = 0.0;
};

SharpnessReport sigma_n_experiment(int n, double radius, std::size_t trials, std::uint64_t seed);

}  // namespace ul
