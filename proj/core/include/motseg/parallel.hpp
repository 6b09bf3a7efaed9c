#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace motseg {

/// Resolve a thread-count setting: 0 means "use the hardware", anything else
/// is taken literally (clamped to at least 1).
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(begin, end, chunk_index) over [0, n) split into `threads` contiguous
/// chunks. Chunk boundaries depend only on n and the thread count, so
/// order-sensitive reductions stay reproducible for a fixed thread count.
/// With one thread everything runs inline on the calling thread.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    const std::size_t t = static_cast<std::size_t>(std::max(1, threads));
    const std::size_t chunks = std::min(t, n);
    if (chunks == 1) {
        fn(std::size_t{0}, n, std::size_t{0});
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        workers.emplace_back([&fn, begin, end, c] { fn(begin, end, c); });
    }
    for (auto& w : workers) w.join();
}

}  // namespace motseg
