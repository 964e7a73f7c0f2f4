#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stoplab {

/// Runs body(block) for every block in [0, n_blocks) on up to `workers` threads.
/// Results must be written to per-block slots; the caller reduces them in block
/// order, which makes the outcome independent of the worker count.
template <class Body>
void parallel_blocks(std::size_t n_blocks, unsigned workers, Body&& body) {
    workers = std::max(1u, workers);
    if (workers == 1 || n_blocks <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) body(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            try {
                body(b);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n_blocks);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned spawn = static_cast<unsigned>(std::min<std::size_t>(workers, n_blocks));
    for (unsigned w = 1; w < spawn; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace stoplab
