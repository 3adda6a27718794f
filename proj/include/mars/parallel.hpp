#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mars {

// Runs fn(i) for i in [0, n) across up to `parallelism` worker threads.
// The first exception wins and is rethrown after all workers join.
template <typename Fn>
void parallel_for_indexed(std::size_t n, int parallelism, Fn&& fn) {
    if (n == 0) return;
    std::size_t workers = static_cast<std::size_t>(parallelism < 1 ? 1 : parallelism);
    if (workers > n) workers = n;
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                {
                    std::lock_guard lock(error_mu);
                    if (first_error) return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace mars
