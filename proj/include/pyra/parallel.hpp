#pragma once

#include <cstddef>
#include <functional>

namespace pyra {

// Process-wide worker pool. All data parallelism in the library goes
// through parallel_for, capped by set_threads (the CLI `threads` setting).
//
// Every parallel_for body computes disjoint elements and each element's
// accumulation order is fixed inside the body, so results are bit-identical
// for any thread count. There are no cross-thread reductions anywhere.
void set_threads(int n);
int thread_count();

using RangeBody = std::function<void(std::size_t begin, std::size_t end)>;

// Invokes body over a partition of [0, n). Runs inline when the pool has a
// single thread, when n is below twice min_grain, or when called from
// inside a worker (nested calls never re-enter the pool). Bodies must not
// throw.
void parallel_for(std::size_t n, std::size_t min_grain, const RangeBody& body);

inline void parallel_for(std::size_t n, const RangeBody& body) {
  parallel_for(n, 256, body);
}

}  // namespace pyra
