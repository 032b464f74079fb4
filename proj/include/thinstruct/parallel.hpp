#pragma once

#include <cstddef>
#include <functional>

namespace thinstruct {

/// Upper bound on worker threads used by parallel stages (default 1).
void set_thread_count(int n);
int thread_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
/// so callers that write only to their own slots stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace thinstruct
