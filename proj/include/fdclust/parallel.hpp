#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fdclust {

/// Runs `fn(i)` for i in [0, count) on up to `degree` threads. Every index
/// writes only its own output slot, so results never depend on scheduling.
/// The first exception thrown (lowest index) is rethrown after all workers
/// have joined.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t degree, Fn&& fn) {
  degree = std::clamp<std::size_t>(degree, 1, std::max<std::size_t>(count, 1));
  if (degree == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_index = count;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(degree);
  for (std::size_t t = 0; t < degree; ++t) pool.emplace_back(worker);
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

/// Maps `fn` over [0, count) into a vector, in index order.
template <typename Fn>
auto parallel_map(std::size_t count, std::size_t degree, Fn&& fn) {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> out(count);
  parallel_for(count, degree, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace fdclust
