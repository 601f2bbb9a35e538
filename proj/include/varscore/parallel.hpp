#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace varscore {

// Runs body(i) for i in [0, n). Parallel across threads when OpenMP is
// enabled and `parallel` is true; the iteration-to-result mapping must not
// depend on thread count. Callers needing deterministic reductions
// accumulate into per-index slots and combine serially afterwards.
template <typename Body>
void parallel_for(std::int64_t n, const Body& body, bool parallel = true) {
#ifdef _OPENMP
  if (parallel && n > 1) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#else
  (void)parallel;
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace varscore
