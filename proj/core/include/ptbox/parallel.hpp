#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ptbox {

// Run fn(worker_id, begin, end) over [0, n) split into `workers` contiguous
// chunks. workers <= 1 runs inline on the calling thread. Results that must
// be deterministic are merged by the caller in worker-id order afterwards.
inline void parallel_chunks(
    std::size_t n, int workers,
    const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        fn(0, 0, n);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    const std::size_t chunk = (n + w - 1) / w;
    std::vector<std::thread> pool;
    pool.reserve(w);
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (std::size_t i = 0; i < w; ++i) {
        const std::size_t lo = i * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, i, lo, hi] {
            try {
                fn(static_cast<int>(i), lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ptbox
