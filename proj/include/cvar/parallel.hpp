#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace cvar {

/// Worker count: CVAR_MDP_THREADS if set and positive, else hardware concurrency.
std::size_t default_thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers with a static
/// partition. Callers write results into preallocated slots indexed by i, so
/// output never depends on scheduling. The first exception thrown by any
/// worker is rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace cvar
