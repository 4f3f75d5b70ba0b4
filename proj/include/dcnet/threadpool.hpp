#pragma once

#include <cstdint>
#include <functional>

namespace dcnet {

// Global worker count for batch/tile parallelism. 1 (the default) runs
// everything inline on the calling thread.
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n). Tasks must write disjoint data; the claim
// order is unspecified but results must not depend on it (every reduction
// in this codebase happens inside a single task in fixed order, so outputs
// are bit-identical for any worker count).
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace dcnet
