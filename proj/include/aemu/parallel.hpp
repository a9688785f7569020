#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace aemu {

// Runs fn(tile_index, begin, end) over [0, n) in fixed-size tiles. Tile
// boundaries depend only on (n, tile), never on the worker count, so callers
// that reduce per-tile results in tile order get bit-identical totals for any
// number of threads.
template <typename Fn>
void parallel_for_tiles(std::size_t n, std::size_t tile, int threads, Fn&& fn) {
    if (n == 0) return;
    const std::size_t num_tiles = (n + tile - 1) / tile;
    if (threads <= 1 || num_tiles == 1) {
        for (std::size_t t = 0; t < num_tiles; ++t)
            fn(t, t * tile, std::min(n, (t + 1) * tile));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1, std::memory_order_relaxed);
            if (t >= num_tiles) return;
            fn(t, t * tile, std::min(n, (t + 1) * tile));
        }
    };
    const int nw = static_cast<int>(std::min<std::size_t>(threads, num_tiles));
    std::vector<std::thread> pool;
    pool.reserve(nw - 1);
    for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

} // namespace aemu
