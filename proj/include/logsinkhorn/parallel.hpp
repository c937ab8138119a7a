#pragma once

#include <cstddef>
#include <functional>

namespace logsinkhorn {

// Runs body(i) for i in [0, count) across `workers` threads (0 = runtime
// default). Iterations must be independent; the schedule is static.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

// Number of workers parallel_for would use for `workers`.
int resolve_workers(int workers);

}  // namespace logsinkhorn
