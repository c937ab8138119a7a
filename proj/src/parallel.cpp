#include "logsinkhorn/parallel.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace logsinkhorn {

int resolve_workers(int workers) {
#ifdef _OPENMP
  return workers > 0 ? workers : omp_get_max_threads();
#else
  (void)workers;
  return 1;
#endif
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  const int threads = resolve_workers(workers);
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
#ifdef _OPENMP
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
#endif
}

}  // namespace logsinkhorn
