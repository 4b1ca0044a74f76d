#pragma once

// Execution policy for the per-pixel kernels. Every kernel has a single
// body; `Exec::serial` runs it as the plain reference loop and
// `Exec::parallel` distributes rows over OpenMP threads. Rows write
// disjoint output, so both modes produce bit-identical results.

#ifdef _OPENMP
#include <omp.h>
#endif

namespace head3d {

enum class Exec { serial, parallel };

/// Caps the OpenMP worker count (no-op without OpenMP). `n <= 0` restores
/// the runtime default.
void set_thread_count(int n);
int thread_count();

template <typename RowFn>
void for_each_row(int height, Exec exec, RowFn&& fn) {
  if (exec == Exec::serial) {
    for (int v = 0; v < height; ++v) fn(v);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int v = 0; v < height; ++v) fn(v);
}

}  // namespace head3d
