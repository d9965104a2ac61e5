#include "klab/parallel.hpp"

#include <omp.h>

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace klab {

namespace {
int default_threads = -1;
}

void set_thread_limit(int threads) {
  if (default_threads < 0) default_threads = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : default_threads);
}

int apply_thread_env() {
  const char* raw = std::getenv("KOROVKIN_LAB_THREADS");
  if (raw == nullptr) return 0;
  int value = 0;
  const auto* end = raw + std::strlen(raw);
  auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc{} || ptr != end || value < 0) return 0;
  set_thread_limit(value);
  return value;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace klab
