#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mdps {

/// Default worker count: the hardware concurrency, at least 1.
unsigned default_threads() noexcept;

/// Resolves a user-facing thread count (0 means default).
inline unsigned resolve_threads(unsigned requested) noexcept {
    return requested == 0 ? default_threads() : requested;
}

/// Splits [0, n) into `threads` contiguous chunks and runs
/// fn(chunk_id, begin, end) for each, chunk 0 on the calling thread. Chunk
/// boundaries depend only on n and threads, so per-chunk outputs merged in
/// chunk order are deterministic.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn &&fn) {
    threads = std::max(1u, threads);
    if (n == 0) return;
    const std::size_t chunks = std::min<std::size_t>(threads, n);
    auto bounds = [&](std::size_t c) { return n * c / chunks; };
    if (chunks == 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(chunks - 1);
    for (std::size_t c = 1; c < chunks; ++c) {
        workers.emplace_back([&fn, c, b = bounds(c), e = bounds(c + 1)] { fn(c, b, e); });
    }
    fn(std::size_t{0}, std::size_t{0}, bounds(1));
}

/// parallel_chunks over individual items.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn &&fn) {
    parallel_chunks(n, threads, [&fn](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace mdps
