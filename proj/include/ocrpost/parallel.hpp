#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace ocrpost {

// Runs f(i) for i in [0, n) over `threads` workers. Results must be written
// into per-index slots so the merge order is deterministic regardless of
// thread count.
template <typename F>
void parallel_for(size_t n, size_t threads, F&& f) {
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }
    if (threads > n) threads = n;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (size_t i = t; i < n; i += threads) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ocrpost
