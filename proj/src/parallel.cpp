#include "arim/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace arim {

std::size_t worker_count() {
    if (const char* env = std::getenv("ARIM_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    parallel_for_workers(n, worker_count(), [&](std::size_t i, std::size_t) { fn(i); });
}

void parallel_for_workers(std::size_t n, std::size_t max_workers,
                          const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t workers = std::min(max_workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto work = [&](std::size_t worker) {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
            try {
                fn(i, worker);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(work, t);
    work(0);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace arim
