#pragma once

#include <cstddef>
#include <functional>

namespace arim {

// Worker count: ARIM_THREADS when set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) across worker threads. The first exception
// thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// As above; fn(i, worker) also receives the worker slot in [0, workers).
void parallel_for_workers(std::size_t n, std::size_t workers,
                          const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace arim
