#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

#include "filab/errors.hpp"

namespace filab {

/**
 * Calls fn(i) for every i in [0, n), split into contiguous chunks over
 * `threads` workers. Results must be written by index so that the output does
 * not depend on scheduling. The first exception in chunk order is rethrown.
 */
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads < 1) throw InputError("parallel_for: threads must be >= 1");
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                const std::size_t end = std::min(n, (w + 1) * chunk);
                for (std::size_t i = w * chunk; i < end; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace filab
