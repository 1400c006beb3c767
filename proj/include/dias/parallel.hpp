#pragma once

#include <cstddef>
#include <functional>

namespace dias {

// Worker count for fan-out: DIAS_THREADS if set and positive, otherwise the
// hardware concurrency.
std::size_t worker_count();

// Calls fn(i) for i in [0, n) on up to worker_count() threads. The first
// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dias
