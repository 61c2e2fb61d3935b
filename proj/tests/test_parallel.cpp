#include <atomic>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lufilter/parallel.hpp"

using namespace luf;

TEST_CASE("parallel_for runs every task exactly once into its own slot") {
  const int n = 57;
  std::vector<long> out(n, -1);
  std::atomic<int> calls{0};
  parallel_for(n, 4, [&](int i) {
    out[static_cast<std::size_t>(i)] = static_cast<long>(i) * i;
    calls.fetch_add(1);
  });
  CHECK(calls.load() == n);
  for (int i = 0; i < n; ++i) CHECK(out[static_cast<std::size_t>(i)] == static_cast<long>(i) * i);
}

TEST_CASE("parallel_for with one worker matches the multi-worker result") {
  const int n = 23;
  std::vector<double> a(n), b(n);
  auto fill = [](std::vector<double>& v) {
    return [&v](int i) { v[static_cast<std::size_t>(i)] = 1.0 / (1.0 + i); };
  };
  parallel_for(n, 1, fill(a));
  parallel_for(n, 5, fill(b));
  for (int i = 0; i < n; ++i) CHECK(a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]);
}

TEST_CASE("parallel_for on zero tasks never invokes the body") {
  std::atomic<int> calls{0};
  parallel_for(0, 4, [&](int) { calls.fetch_add(1); });
  CHECK(calls.load() == 0);
}

TEST_CASE("an exception thrown by a task is rethrown on the calling thread") {
  CHECK_THROWS_AS(parallel_for(20, 3,
                               [](int i) {
                                 if (i == 13) throw std::runtime_error("task 13");
                               }),
                  std::runtime_error);
  // The throwing worker abandons its remaining strided tasks (worker 1 owns
  // 13, 16, 19 with 3 workers); everything else runs to completion.
  std::vector<int> seen(20, 0);
  try {
    parallel_for(20, 3, [&](int i) {
      seen[static_cast<std::size_t>(i)] = 1;
      if (i == 13) throw std::runtime_error("task 13");
    });
  } catch (const std::runtime_error&) {
  }
  int done = 0;
  for (int v : seen) done += v;
  CHECK(done == 18);
  CHECK(seen[13] == 1);
  CHECK(seen[16] == 0);
  CHECK(seen[19] == 0);
  CHECK(seen[10] == 1);
}

TEST_CASE("effective_workers clamps to the task count and rejects negatives") {
  CHECK(effective_workers(3, 8) == 3);
  CHECK(effective_workers(8, 3) == 3);
  CHECK(effective_workers(10, 0) >= 1);
  CHECK(effective_workers(0, 0) == 1);
  CHECK_THROWS_AS(effective_workers(4, -1), std::invalid_argument);
}
