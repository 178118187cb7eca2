#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace icph {

/// Runs body(i) for i in [begin, end) on a bounded worker pool. Work items
/// must be independent; callers make results deterministic by writing into
/// index-addressed slots. The first exception is rethrown after all workers
/// drain.
inline void parallel_for(int begin, int end, int threads,
                         const std::function<void(int)>& body) {
  if (threads <= 1 || end - begin <= 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  std::atomic<int> next{begin};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int workers = std::min(threads, end - begin);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= end) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace icph
