#include "levybsde/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace levybsde {

namespace {
int g_max_threads = static_cast<int>(std::thread::hardware_concurrency());
} // namespace

int max_threads() { return g_max_threads > 0 ? g_max_threads : 1; }

void set_max_threads(int n) { g_max_threads = n > 0 ? n : 1; }

void parallel_for_blocks(std::size_t n, std::size_t block_size,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (block_size == 0) block_size = 1;
    const std::size_t nblocks = block_count(n, block_size);
    const int nthreads = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), nblocks);
    if (nthreads <= 1) {
        for (std::size_t b = 0; b < nblocks; ++b) {
            std::size_t lo = b * block_size;
            fn(lo, std::min(n, lo + block_size), b);
        }
        return;
    }
    // Exceptions are collected per block and rethrown on the calling thread;
    // the lowest block index wins, so the surfaced error does not depend on
    // thread scheduling.
    std::vector<std::exception_ptr> errors(nblocks);
    std::atomic<bool> failed{false};
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t b = next.fetch_add(1);
            if (b >= nblocks) break;
            if (failed.load(std::memory_order_relaxed)) continue;
            std::size_t lo = b * block_size;
            try {
                fn(lo, std::min(n, lo + block_size), b);
            } catch (...) {
                errors[b] = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) {
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
}

} // namespace levybsde
