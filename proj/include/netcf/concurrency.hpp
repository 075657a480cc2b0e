#pragma once

#include "netcf/errors.hpp"

#include <atomic>
#include <cstddef>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace netcf {

// Runs fn(0..n-1) on a worker pool. Each index owns its output slot, so the
// reduction is identical for any thread count.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t k = std::min(threads, n);
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mx;
    for (std::size_t w = 0; w < k; ++w)
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(err_mx);
                    if (!failed.exchange(true)) first_error = e.what();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failed) throw EstimatorError("parallel task failed: " + first_error);
}

} // namespace netcf
