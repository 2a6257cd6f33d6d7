#include "dlen/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace dlen {

namespace {
std::atomic<std::size_t> g_threads{1};
}

void set_num_threads(std::size_t n) { g_threads.store(std::max<std::size_t>(1, n)); }

std::size_t num_threads() { return g_threads.load(); }

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t begin, std::size_t end)>& fn) {
  const std::size_t workers = std::min(num_threads(), count);
  if (workers <= 1) {
    if (count > 0) fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace dlen
