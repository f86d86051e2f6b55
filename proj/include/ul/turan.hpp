#pragma once

// Trigonometric polynomials on the torus T^d = [0,1)^d, certified sup norms
// on box unions, and the Turan-type inequalities in one and several variables.

#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include "ul/geometry.hpp"
#include "ul/lattice.hpp"

namespace ul {

// P(t) = sum_k c_k exp(2 i pi <k, t>).
class TrigPolynomial {
 public:
  using Terms = std::map<IntVec, std::complex<double>>;

  // Zero coefficients are dropped; at least one nonzero term must remain.
  TrigPolynomial(int dimension, Terms terms);

  int dimension() const { return dimension_; }
  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  std::complex<double> evaluate(const Vec& t) const;
  // Largest |k_i| over the spectrum.
  int max_abs_frequency() const;
  // 2 pi sum |c_k| |k|, a Lipschitz constant of P (hence of |P|).
  double gradient_bound() const;

 private:
  int dimension_;
  Terms terms_;
};

struct PolyOrder {
  // Distinct i-th coordinates minus one.
  std::vector<int> per_axis;
  // Number of terms.
  int term_count = 0;
  // sum per_axis; equals set_order - d.
  int fm_exponent = 0;
  // sum of distinct counts.
  int set_order = 0;
};

PolyOrder poly_order(const TrigPolynomial& p);

// Finite union of boxes inside [0,1]^d.
class TorusSet {
 public:
  TorusSet(int dimension, std::vector<AxisBox> boxes);
  static TorusSet full(int dimension);
  // Union of arcs [start, start + length) taken mod 1, split where they wrap.
  static TorusSet arcs(const std::vector<std::pair<double, double>>& start_length);
  // Box [lower, lower + sides) wrapped mod 1 on every axis.
  static TorusSet wrapped_box(const Vec& lower, const Vec& sides);

  int dimension() const { return dimension_; }
  const std::vector<AxisBox>& boxes() const { return boxes_; }
  bool contains(const Vec& t) const;
  // Exact measure of the union by coordinate compression.
  double measure() const;
  TorusSet united(const TorusSet& other) const;

 private:
  int dimension_;
  std::vector<AxisBox> boxes_;
};

struct SupNorm {
  // Largest |P| found (a lower bound for the sup).
  double value = 0.0;
  // value + gradient bound * sqrt(d) * h / 2 (an upper bound for the sup).
  double upper = 0.0;
  double spacing = 0.0;
};

// Grid with spacing at most 1 / (8 (K + 1)) on every box, K the largest
// frequency coordinate, followed by 3 golden-section steps per axis.
SupNorm sup_norm(const TrigPolynomial& p, const TorusSet& region);

struct TuranCheck {
  double lhs = 0.0;
  double lhs_upper = 0.0;
  double sup_e = 0.0;
  double sup_e_upper = 0.0;
  double factor = 1.0;
  double measure = 0.0;
  // factor * sup_e.
  double rhs = 0.0;
  // False only for a certified violation: lhs > factor * sup_e_upper.
  bool holds = true;
};

// (14 / |E|)^{m - 1}, m the number of terms; d = 1 only.
TuranCheck turan_check_1d(const TrigPolynomial& p, const TorusSet& e);
// (14 d / |E|)^{m_1 + ... + m_d}.
TuranCheck turan_check_multidim(const TrigPolynomial& p, const TorusSet& e);

struct CampaignRow {
  std::uint64_t seed = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double factor = 0.0;
  bool holds = true;
};

// Random instance generators; d = 1: up to 8 terms with frequencies in
// [-20, 20] and up to 4 arcs with |E| >= 0.1. d = 2: spectra inside a product
// of two sets of at most 3 frequencies from [-5, 5], up to 3 wrapped boxes
// with |E| >= 0.05.
TrigPolynomial random_polynomial(int d, Rng& rng);
TorusSet random_torus_set(int d, Rng& rng);

// Instance i is generated from Rng(row.seed) with row.seed = substream_seed(seed, i).
std::vector<CampaignRow> turan_campaign(int d, std::size_t count, std::uint64_t seed);

}  // namespace ul
