#pragma once

#include <cstddef>
#include <functional>

namespace rgdno {

// Number of worker threads used by parallel_for when callers pass 0.
// Defaults to hardware_concurrency; settable once from the CLI.
int default_workers();
void set_default_workers(int n);

// Runs fn(i) for i in [0, n). Work items must write only to slots indexed
// by i so results are independent of thread count and scheduling. Any
// exception from a worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int workers = 0);

}  // namespace rgdno
