#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cfreg {

/// How per-index work is scheduled. Every parallel code path in the library
/// partitions work into a fixed set of tasks whose outputs are combined in task
/// order, so both modes produce identical results.
enum class Execution { sequential, parallel };

/// Runs task(i) for i in [0, count). In parallel mode tasks are pulled by up
/// to hardware_concurrency() worker threads; the first exception is rethrown.
template <typename Task>
void run_tasks(std::size_t count, Execution mode, Task&& task) {
  const std::size_t workers =
      mode == Execution::sequential
          ? 1
          : std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Splits [0, n) into contiguous blocks of at most `block` indices and calls
/// body(begin, end) for each.
template <typename Body>
void parallel_for(std::size_t n, Execution mode, Body&& body, std::size_t block = 64) {
  const std::size_t tasks = (n + block - 1) / block;
  run_tasks(tasks, mode, [&](std::size_t t) { body(t * block, std::min(n, (t + 1) * block)); });
}

}  // namespace cfreg
