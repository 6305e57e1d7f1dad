#pragma once

#include <cstddef>
#include <type_traits>
#include <limits>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bregalt::par {

// Execution mode for the grid-scan kernels. Every parallel kernel has a
// serial reference implementation; tests compare the two and the benchmark
// target times them against each other. Reductions are limited to min/max
// and lowest-index argmin, which are order-independent in exact floating
// point, so both modes produce identical results.
enum class Exec { serial, openmp };

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

struct ArgMin {
  double value = std::numeric_limits<double>::infinity();
  std::ptrdiff_t index = -1;
};

// Lexicographic (value, index) merge keeps the lowest-index tie-break
// deterministic regardless of evaluation order.
inline void merge_argmin(ArgMin& into, const ArgMin& other) {
  if (other.index < 0) return;
  if (into.index < 0 || other.value < into.value ||
      (other.value == into.value && other.index < into.index)) {
    into = other;
  }
}

template <class F>
ArgMin argmin(std::ptrdiff_t n, Exec mode, F&& f) {
  ArgMin best;
#ifdef _OPENMP
  if (mode == Exec::openmp) {
#pragma omp parallel
    {
      ArgMin local;
      #pragma omp for nowait
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        merge_argmin(local, ArgMin{f(i), i});
      }
      #pragma omp critical(bregalt_argmin)
      merge_argmin(best, local);
    }
    return best;
  }
#else
  (void)mode;
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    merge_argmin(best, ArgMin{f(i), i});
  }
  return best;
}

template <class F>
double reduce_min(std::ptrdiff_t n, Exec mode, F&& f) {
  double best = std::numeric_limits<double>::infinity();
#ifdef _OPENMP
  if (mode == Exec::openmp) {
#pragma omp parallel for reduction(min : best)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      double v = f(i);
      if (v < best) best = v;
    }
    return best;
  }
#else
  (void)mode;
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double v = f(i);
    if (v < best) best = v;
  }
  return best;
}

struct MinMax {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
};

// The element functor may return either a plain double or a MinMax
// sub-range; both are merged into one overall range.
template <class F>
MinMax element_range(F&& f, std::ptrdiff_t i) {
  if constexpr (std::is_same_v<std::decay_t<decltype(f(i))>, MinMax>) {
    return f(i);
  } else {
    double v = f(i);
    return MinMax{v, v};
  }
}

template <class F>
MinMax reduce_minmax(std::ptrdiff_t n, Exec mode, F&& f) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
#ifdef _OPENMP
  if (mode == Exec::openmp) {
#pragma omp parallel for reduction(min : lo) reduction(max : hi)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      MinMax v = element_range(f, i);
      if (v.min < lo) lo = v.min;
      if (v.max > hi) hi = v.max;
    }
    return MinMax{lo, hi};
  }
#else
  (void)mode;
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    MinMax v = element_range(f, i);
    if (v.min < lo) lo = v.min;
    if (v.max > hi) hi = v.max;
  }
  return MinMax{lo, hi};
}

}  // namespace bregalt::par
