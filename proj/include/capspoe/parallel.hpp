#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace capspoe {

/// Runs work(item, slot) for item in [0,count) in rounds of at most
/// `threads` concurrent items, then calls reduce(item, slot) in ascending
/// item order after each round. Work must only touch its own slot, so the
/// overall result is independent of thread count and scheduling.
inline void deterministic_rounds(std::size_t count, std::size_t threads,
                                 const std::function<void(std::size_t, std::size_t)>& work,
                                 const std::function<void(std::size_t, std::size_t)>& reduce) {
    if (threads == 0) threads = 1;
    for (std::size_t base = 0; base < count; base += threads) {
        std::size_t in_round = std::min(threads, count - base);
        std::vector<std::thread> pool;
        pool.reserve(in_round);
        for (std::size_t t = 1; t < in_round; ++t)
            pool.emplace_back([&work, base, t] { work(base + t, t); });
        work(base, 0);
        for (auto& th : pool) th.join();
        for (std::size_t t = 0; t < in_round; ++t) reduce(base + t, t);
    }
}

inline std::size_t resolve_thread_count(int requested) {
    if (requested > 0) return static_cast<std::size_t>(requested);
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

} // namespace capspoe
