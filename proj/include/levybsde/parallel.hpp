#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace levybsde {

int max_threads();
void set_max_threads(int n);

// Runs fn(begin, end, block_index) over fixed-size blocks of [0, n). Blocks
// are fixed regardless of the thread count, so any per-block accumulation that
// is later reduced in block order gives results independent of threading.
void parallel_for_blocks(std::size_t n, std::size_t block_size,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t block_count(std::size_t n, std::size_t block_size) {
    return (n + block_size - 1) / block_size;
}

} // namespace levybsde
