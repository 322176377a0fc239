// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_PARALLEL_H
#define SKINFIT_PARALLEL_H

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace skinfit {

// Runs fn(begin, end) over contiguous slices of [0, count) on up to
// `workers` threads. Slices never overlap, so writes to per-index outputs
// need no synchronization; results do not depend on the worker count as
// long as fn only writes to its own indices.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t, std::size_t)> &fn) {
    if (count == 0) return;
    const std::size_t n = std::max<std::size_t>(
        1, std::min<std::size_t>(count, std::size_t(workers < 1 ? 1 : workers)));
    if (n == 1) {
        fn(0, count);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n);
    threads.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        const std::size_t begin = count * w / n, end = count * (w + 1) / n;
        threads.emplace_back([&, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : threads) t.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace skinfit

#endif  // SKINFIT_PARALLEL_H
