#pragma once

#include <cstddef>
#include <functional>

namespace pointkan {

// Worker count for the parallel sections (forward passes, dataset
// conversion). All parallel loops write disjoint outputs, so results are
// bit-identical for every thread count; gradient accumulation always runs
// single-threaded.
void set_num_threads(int threads);
int num_threads();

// Runs fn(i) for i in [0, n), chunked contiguously over the worker threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pointkan
