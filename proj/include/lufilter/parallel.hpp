#pragma once

#include <exception>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace luf {

// Workers actually used for `n_tasks` given a request of `n_workers`
// (0 = one per hardware thread), never more than there are tasks.
inline int effective_workers(int n_tasks, int n_workers) {
  if (n_workers < 0) throw std::invalid_argument("parallel: n_workers must be >= 0");
  if (n_workers == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    n_workers = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return n_tasks < n_workers ? (n_tasks < 1 ? 1 : n_tasks) : n_workers;
}

// Runs fn(i) for i in [0, n_tasks) across a worker pool. Tasks must be
// independent; each writes only its own output slot, so results are
// deterministic regardless of scheduling. Static stride assignment (worker w
// takes i = w, w + W, ...) keeps the task->worker mapping itself
// deterministic too. A task that throws stops its own worker's remaining
// tasks; other workers run to completion, then the first worker's captured
// exception is rethrown on the calling thread after all workers join.
inline void parallel_for(int n_tasks, int n_workers, const std::function<void(int)>& fn) {
  if (n_tasks <= 0) return;
  int w = effective_workers(n_tasks, n_workers);
  if (w == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int worker = 0; worker < w; ++worker) {
    pool.emplace_back([&, worker] {
      try {
        for (int i = worker; i < n_tasks; i += w) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(worker)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace luf
