#include "deh/kernels.hpp"

#include <omp.h>

namespace deh {

namespace {
int default_threads() {
  static const int initial = omp_get_max_threads();
  return initial;
}
}  // namespace

void set_thread_count(std::size_t threads) {
  const int fallback = default_threads();
  omp_set_num_threads(threads == 0 ? fallback : static_cast<int>(threads));
}

std::size_t thread_count() { return static_cast<std::size_t>(omp_get_max_threads()); }

}  // namespace deh
