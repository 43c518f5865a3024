/**
 * @file parallel.hpp
 * @brief Fixed-block fan-out and order-fixed reductions
 *
 * Work is cut into blocks whose boundaries depend only on the problem size.
 * Threads pick up whole blocks, and partial results are combined by a pairwise
 * tree over block index, so every result is independent of the worker count.
 */

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace gexpect::parallel {

inline constexpr std::size_t kBlockSize = 512;

inline std::size_t block_count(std::size_t n, std::size_t block = kBlockSize) {
    return (n + block - 1) / block;
}

/// Worker count from GEXPECT_THREADS, defaulting to 1.
inline unsigned threads_from_env() {
    if (const char* env = std::getenv("GEXPECT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

/**
 * Calls `fn(block_index, begin, end)` for every block of [0, n).
 * Blocks are interleaved across `threads` workers; the first exception is rethrown.
 */
template <class Fn>
void for_blocks(std::size_t n, unsigned threads, Fn&& fn, std::size_t block = kBlockSize) {
    const std::size_t blocks = block_count(n, block);
    auto run = [&](std::size_t b) {
        const std::size_t begin = b * block;
        fn(b, begin, std::min(n, begin + block));
    };
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), blocks));
    if (workers <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) run(b);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t b = w; b < blocks; b += workers) run(b);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Pairwise tree combination of `parts` (in place); returns parts[0].
template <class T, class Combine>
T tree_reduce(std::vector<T> parts, Combine&& combine) {
    if (parts.empty()) return T{};
    for (std::size_t stride = 1; stride < parts.size(); stride *= 2) {
        for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) {
            combine(parts[i], parts[i + stride]);
        }
    }
    return std::move(parts[0]);
}

/// Sum of `values` in fixed blocks, blocks combined pairwise.
inline double deterministic_sum(std::span<const double> values) {
    std::vector<double> parts(block_count(values.size()), 0.0);
    for (std::size_t b = 0; b < parts.size(); ++b) {
        const std::size_t begin = b * kBlockSize;
        const std::size_t end = std::min(values.size(), begin + kBlockSize);
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += values[i];
        parts[b] = s;
    }
    return tree_reduce(std::move(parts), [](double& a, double b) { a += b; });
}

} // namespace gexpect::parallel
