#pragma once

// Deterministic task-parallel loop. Each index writes only its own output
// slot and callers reduce in index order afterwards, so results are
// bit-identical for any thread count (including 1). Thread count comes from
// WFLSIM_THREADS, falling back to the hardware concurrency.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wfl {

inline int thread_count() {
    if (const char* env = std::getenv("WFLSIM_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(i) for i in [0, n). fn must only write state owned by index i.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
    if (threads <= 0) threads = thread_count();
    if (n == 0) return;
    if (threads == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t grain = n >= 1024 ? 32 : 1;
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            std::size_t begin = next.fetch_add(grain);
            if (begin >= n) return;
            std::size_t end = begin + grain < n ? begin + grain : n;
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::size_t spawn = static_cast<std::size_t>(threads) < n ? static_cast<std::size_t>(threads) : n;
    std::vector<std::thread> pool;
    pool.reserve(spawn - 1);
    for (std::size_t t = 1; t < spawn; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace wfl
