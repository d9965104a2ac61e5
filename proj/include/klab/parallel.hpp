#pragma once

namespace klab {

/// Selects the serial reference kernel or its OpenMP counterpart.
enum class Execution { serial, parallel };

/// Caps the number of OpenMP threads used by the library. 0 restores the
/// runtime default.
void set_thread_limit(int threads);

/// Reads KOROVKIN_LAB_THREADS and applies it; unset or unparsable leaves the
/// runtime default in place. Returns the effective limit (0 = auto).
int apply_thread_env();

int max_threads();

}  // namespace klab

#include <cstdint>
#include <exception>

namespace klab {

/// Runs fn(i) for i in [0, count). The parallel path uses a dynamic schedule;
/// fn must write only to slots owned by i. The first exception thrown by any
/// iteration is rethrown after the loop.
template <typename Fn>
void parallel_for(std::int64_t count, Execution exec, Fn&& fn) {
  if (exec == Execution::serial || count < 2) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(klab_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace klab
