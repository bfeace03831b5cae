#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace invset {

/// Runs fn(i) for i in [0, count) on up to `threads` workers with contiguous
/// static chunks. Rethrows the exception of the lowest failing index.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::size_t> error_index(threads, count);
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        const std::size_t chunk = (count + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                const std::size_t begin = t * chunk;
                const std::size_t end = std::min(count, begin + chunk);
                for (std::size_t i = begin; i < end; ++i) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[t] = std::current_exception();
                        error_index[t] = i;
                        return;
                    }
                }
            });
        }
    }
    std::size_t best = count;
    std::exception_ptr first;
    for (unsigned t = 0; t < threads; ++t)
        if (errors[t] && error_index[t] < best) {
            best = error_index[t];
            first = errors[t];
        }
    if (first) std::rethrow_exception(first);
}

}  // namespace invset

namespace invset {

/// Splits [0, count) into at most `threads` contiguous ranges and runs
/// fn(begin, end) for each, so workers can own scratch space.
template <typename Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    const std::size_t chunk = (count + threads - 1) / threads;
    parallel_for(threads, threads, [&](std::size_t t) {
        const std::size_t begin = std::min(count, t * chunk);
        const std::size_t end = std::min(count, begin + chunk);
        if (begin < end) fn(begin, end);
    });
}

}  // namespace invset
