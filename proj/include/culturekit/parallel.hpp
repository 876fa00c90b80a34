#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace culturekit::parallel {

// Runs fn(i) for i in [0, count) on up to `parallelism` threads. The first
// exception wins and is rethrown on the caller's thread after all workers
// drain.
template <typename Fn>
void for_each_index(size_t count, int parallelism, Fn&& fn) {
  if (count == 0) return;
  size_t workers = static_cast<size_t>(std::max(1, parallelism));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= count) return;
        {
          std::lock_guard lock(error_mu);
          if (error) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace culturekit::parallel
