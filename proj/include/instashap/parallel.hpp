#pragma once

#include <cstddef>
#include <functional>

namespace instashap {

// Worker count: INSTASHAP_NUM_THREADS when set to a positive integer, else the
// hardware concurrency (at least 1).
int NumThreads();
void SetNumThreads(int n);

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend
// only on n and the thread count, so per-index results are deterministic; the
// caller owns any reduction and must perform it in index order.
void ParallelFor(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace instashap
