#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace cropmine {

/// Run fn(begin, end) over [0, count) split into contiguous chunks.
/// threads <= 1 runs inline (the deterministic reference mode). Each element
/// is processed exactly once by exactly one thread, so per-element results
/// are identical to the single-threaded run.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count < 2) {
        fn(std::size_t{0}, count);
        return;
    }
    const auto n_threads = static_cast<std::size_t>(threads);
    const std::size_t chunk = (count + n_threads - 1) / n_threads;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        const std::size_t begin = t * chunk;
        if (begin >= count) break;
        const std::size_t end = std::min(begin + chunk, count);
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& worker : pool) worker.join();
}

} // namespace cropmine
