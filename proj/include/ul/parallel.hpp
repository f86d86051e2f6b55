#pragma once

// Trial loops come in two flavours: a serial reference loop and an OpenMP
// loop. Both write per-trial values into a buffer that is reduced in a fixed
// pairwise order, so the two paths are bit-identical for any thread count.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ul {

enum class Exec { serial, parallel };

// Process-wide default used by every Monte Carlo operation.
Exec execution();
void set_execution(Exec exec);
void set_threads(int threads);
int max_threads();

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  bool exact = false;
};

double pairwise_sum(std::span<const double> values);

// Sample mean and sample standard deviation / sqrt(n).
Estimate mean_and_stderr(std::span<const double> values);

template <class F>
std::vector<double> evaluate_trials_serial(std::size_t n, F&& fn) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

template <class F>
std::vector<double> evaluate_trials_parallel(std::size_t n, F&& fn) {
  std::vector<double> out(n);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(ul_trial_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

template <class F>
std::vector<double> evaluate_trials(std::size_t n, F&& fn, Exec exec = execution()) {
  if (exec == Exec::parallel) return evaluate_trials_parallel(n, fn);
  return evaluate_trials_serial(n, fn);
}

// Generic per-item map for non-scalar results (e.g. campaign rows).
template <class T, class F>
std::vector<T> map_items(std::size_t n, F&& fn, Exec exec = execution()) {
  std::vector<T> out(n);
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(ul_item_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace ul
