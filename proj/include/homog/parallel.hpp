#pragma once

// Deterministic fork-join helper. Work items write to disjoint outputs keyed
// by index, so the result is identical for any thread count; only wall time
// changes.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace homog {

inline unsigned& thread_count_ref() {
    static unsigned n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

inline void set_thread_count(unsigned n) { thread_count_ref() = std::max(1u, n); }
inline unsigned thread_count() { return thread_count_ref(); }

// Runs fn(i) for i in [0, n). fn must only write to state owned by index i.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace homog
