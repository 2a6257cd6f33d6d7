#pragma once

#include <cstddef>
#include <functional>

namespace dlen {

// Worker count used by parallel_for. Default 1 (fully sequential).
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Splits [0, count) into contiguous chunks run on up to num_threads() threads. Each index
// is owned by exactly one chunk, so work that writes only to index-owned outputs is
// deterministic regardless of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t begin, std::size_t end)>& fn);

}  // namespace dlen
