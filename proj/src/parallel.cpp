#include "nlos/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace nlos {

namespace {
std::atomic<int> g_threads{0};  // 0 means "use hardware concurrency"
}

int num_threads() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_num_threads(int n) {
    if (n < 0) throw std::invalid_argument("set_num_threads: n must be >= 0");
    g_threads.store(n, std::memory_order_relaxed);
}

namespace detail {

void parallel_for_impl(std::int64_t begin, std::int64_t end,
                       const std::function<void(std::int64_t, std::int64_t)>& chunk_fn) {
    const std::int64_t count = end - begin;
    if (count <= 0) return;
    const int workers = static_cast<int>(std::min<std::int64_t>(num_threads(), count));
    if (workers <= 1) {
        chunk_fn(begin, end);
        return;
    }
    // Static contiguous partition; worker w owns [lo, hi), independent of
    // scheduling, so outputs do not depend on the thread count.
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::int64_t base = count / workers;
    const std::int64_t extra = count % workers;
    std::int64_t lo = begin;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t hi = lo + base + (w < extra ? 1 : 0);
        threads.emplace_back([&chunk_fn, lo, hi, &error, &error_mutex]() {
            try {
                chunk_fn(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
        lo = hi;
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

}  // namespace nlos
