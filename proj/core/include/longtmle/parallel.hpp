#pragma once

#include <cstddef>
#include <functional>

namespace longtmle {

// Number of worker threads a parallel loop will actually use. requested = 0
// means one thread per hardware core.
std::size_t effective_threads(std::size_t requested = 0);

// Runs fn(i) for i in [0, n) across a small thread pool. Work is handed out
// through an atomic counter, so tasks of uneven size balance out. fn must
// write only to per-index slots; results are then independent of scheduling.
// Exceptions thrown by fn are captured and the first one is rethrown after
// all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t n_threads = 0);

}  // namespace longtmle
