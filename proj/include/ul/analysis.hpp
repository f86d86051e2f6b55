#pragma once

// Closed-form test functions, the random periodization of a function over a
// rotated and dilated lattice, and energy/tail computations around it.
//
// Fourier convention: f^(xi) = int f(x) exp(+2 i pi <x, xi>) dx. Torus
// coefficients follow the same sign, c(m) = int_T G(t) exp(+2 i pi <m, t>) dt,
// so the synthesis is G(t) = sum_m c(m) exp(-2 i pi <m, t>).

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ul/geometry.hpp"
#include "ul/lattice.hpp"

namespace ul {

using Complex = std::complex<double>;

class TestFunction {
 public:
  enum class Kind { gaussian, box, combination, modulated, translated };

  // exp(-pi |x|^2 / scale^2); transform scale^d exp(-pi scale^2 |xi|^2).
  static TestFunction gaussian(int d, double scale);
  static TestFunction box(AxisBox box);
  static TestFunction combination(std::vector<std::pair<Complex, TestFunction>> terms);
  // f(x) exp(+2 i pi <x, y>), whose transform is f^(xi + y).
  static TestFunction modulated(TestFunction base, Vec frequency);
  // f(x - offset).
  static TestFunction translated(TestFunction base, Vec offset);

  Kind kind() const;
  int dimension() const;
  double scale() const;
  const AxisBox& box_shape() const;
  const std::vector<std::pair<Complex, TestFunction>>& terms() const;
  const TestFunction& base() const;
  // Modulation frequency or translation offset.
  const Vec& shift() const;

  Complex evaluate(const Vec& x) const;
  Complex evaluate_hat(const Vec& xi) const;

  RadialMajorant space_envelope() const;
  RadialMajorant frequency_envelope() const;

  // Closed set outside which f vanishes; nullopt when f has unbounded support.
  std::optional<EuclideanSet> support() const;

  // ||f||_2^2 in closed form.
  double energy() const;

  // x -> f(lambda x).
  TestFunction scaled(double lambda) const;

 private:
  struct Node;
  explicit TestFunction(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// c * g(x - center) * exp(2 i pi <x, modulation>), g a centred Gaussian or a
// box indicator (box stored in absolute position, center unused).
struct Atom {
  bool is_box = false;
  Complex coefficient{1.0, 0.0};
  double scale = 1.0;
  AxisBox box;
  Vec center;
  Vec modulation;
};

std::vector<Atom> flatten(const TestFunction& f);

// Linear combination of box indicators sharing one modulation frequency.
struct BoxFamily {
  std::vector<std::pair<Complex, AxisBox>> terms;
  Vec modulation;
};

std::optional<BoxFamily> box_family(const TestFunction& f);

// int f(x) conj f(x + z) dx in closed form. Box/Gaussian cross terms are only
// available when both atoms carry the same modulation.
Complex autocorrelation(std::span<const Atom> atoms, const Vec& z);

Complex atom_value(const Atom& atom, const Vec& x);
Complex atom_hat(const Atom& atom, const Vec& xi);

// Smallest radius beyond which the envelope stays below rel * bound(0).
double envelope_cutoff(const RadialMajorant& envelope, double rel);

class Periodization {
 public:
  Periodization(TestFunction source, RandomLattice lattice);

  const TestFunction& source() const { return source_; }
  const RandomLattice& lattice() const { return lattice_; }
  int dimension() const { return lattice_.dimension(); }

  // sqrt(v) f^(v rho^T m).
  Complex coefficient(std::span<const int> m) const;
  // v^{1/2 - d} sum_k f(rho^T (k + t) / v).
  Complex value(const Vec& t) const;

  // int_T |G|^2 from the spatial definition, as the lattice sum
  // v^{1-d} sum_j A(rho^T j / v) of the autocorrelation A(z) = int f(x) conj f(x+z).
  double energy() const;
  // sum_m |c(m)|^2: direct truncated sum for smooth sources, Gaussian-split
  // summation with a Poisson-resummed remainder for box families.
  double coefficient_energy() const;

  // Cell-centred grid t = (i + 1/2) / n; 1 where some k puts
  // rho^T (k + t) / v in the source support.
  std::vector<std::uint8_t> support_mask(int grid_n) const;
  double support_fraction(int grid_n) const;

 private:
  TestFunction source_;
  RandomLattice lattice_;
  std::vector<Atom> atoms_;
  std::optional<BoxFamily> family_;
  double space_cutoff_;
};

enum class Side { space, frequency };
enum class TailMethod { automatic, closed_form, grid, monte_carlo };

struct TailOptions {
  TailMethod method = TailMethod::automatic;
  // Composite Gauss-Legendre panels per unit length (grid method).
  double panels_per_unit = 1.0;
  std::size_t samples = 400000;
  std::uint64_t seed = 0;
};

// int over R^d minus region of |f|^2 (space side) or |f^|^2 (frequency side).
Estimate tail_energy(const TestFunction& f, Side side, const EuclideanSet& region,
                     const TailOptions& options = {});

// int over region of |f|^2 or |f^|^2 by composite Gauss-Legendre, refined by
// panel doubling until two levels agree; std_error is the last difference.
// Requires pairwise disjoint pieces and d <= 3.
Estimate energy_inside(const TestFunction& f, Side side, const EuclideanSet& region,
                       double panels_per_unit = 1.0);

// phi = |f| as a lattice-averaging integrand.
LalIntegrand lal_integrand(const TestFunction& f);

struct EnergyCheckOptions {
  double lal_constant = kLatticeAveragingConstant;
};

// E ||G||^2 against 2 |f^(0)|^2 + 2 C ||f||^2.
ExpectationReport check_energy_expectation(const TestFunction& f, std::size_t trials,
                                           std::uint64_t seed, const EnergyCheckOptions& options = {});

// E sum_{m outside M} |c(m)|^2 against 2 C int_{outside sigma} |f^|^2.
ExpectationReport check_tail_coeff_expectation(const TestFunction& f, const EuclideanSet& sigma,
                                               std::size_t trials, std::uint64_t seed,
                                               const EnergyCheckOptions& options = {});

}  // namespace ul
