#include "ul/parallel.hpp"

#include <atomic>
#include <cmath>

namespace ul {

namespace {
std::atomic<Exec> g_exec{Exec::parallel};
}

Exec execution() { return g_exec.load(); }

void set_execution(Exec exec) { g_exec.store(exec); }

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Estimate mean_and_stderr(std::span<const double> values) {
  Estimate e;
  e.trials = values.size();
  if (values.empty()) return e;
  const double n = static_cast<double>(values.size());
  e.value = pairwise_sum(values) / n;
  if (values.size() < 2) return e;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dv = values[i] - e.value;
    sq[i] = dv * dv;
  }
  const double var = pairwise_sum(sq) / (n - 1.0);
  e.std_error = std::sqrt(var / n);
  return e;
}

}  // namespace ul
