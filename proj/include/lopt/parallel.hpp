#pragma once

#include <cstddef>
#include <functional>

namespace lopt {

/// Number of workers used by parallel_for. 0 means hardware concurrency.
void set_thread_count(int threads);
int thread_count();

/// Calls body(i) for i in [0, n). Work is split in contiguous chunks; callers
/// write results into slot i so that the outcome never depends on the
/// schedule. Exceptions from any worker are rethrown on the calling thread
/// (the one from the lowest index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lopt
