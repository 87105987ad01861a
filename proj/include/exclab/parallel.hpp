#pragma once

#include <cstdint>
#include <cstdlib>

#include <omp.h>

namespace exclab {

// Worker resolution order: explicit argument > EXCURSION_LAB_WORKERS > cores.
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EXCURSION_LAB_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return omp_get_num_procs();
}

// Replicate-parallel map. Each body(i) must write only to slot i of some
// preallocated output so results are identical for any worker count; the
// workers == 1 path is the serial reference used by tests and the benchmark.
template <class F>
void parallel_for(int64_t nitems, int workers, F&& body) {
  if (workers <= 1) {
    for (int64_t i = 0; i < nitems; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int64_t i = 0; i < nitems; ++i) body(i);
}

}  // namespace exclab
