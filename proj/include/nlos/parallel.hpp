#pragma once

#include <cstdint>
#include <functional>

namespace nlos {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency. All parallel loops in this library partition work statically
/// over disjoint output ranges, so results are bit-identical for any thread
/// count.
int num_threads();
void set_num_threads(int n);

namespace detail {
void parallel_for_impl(std::int64_t begin, std::int64_t end,
                       const std::function<void(std::int64_t, std::int64_t)>& chunk_fn);
}

/// Runs fn(i) for i in [begin, end) across the configured worker threads.
/// fn must only write state owned by index i.
template <typename Fn>
void parallel_for(std::int64_t begin, std::int64_t end, Fn&& fn) {
    detail::parallel_for_impl(begin, end, [&fn](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) fn(static_cast<int>(i));
    });
}

}  // namespace nlos
