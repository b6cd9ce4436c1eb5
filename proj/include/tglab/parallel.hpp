#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tglab {

inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Calls f(index, worker) for every index in [0, count). Indices are handed out
/// in ascending blocks, so callers that merge by lowest index stay deterministic
/// regardless of the job count. The first exception thrown is rethrown.
template <class F>
void parallel_for(std::size_t count, int jobs, F&& f, std::size_t block = 16) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>((count + block - 1) / std::max<std::size_t>(block, 1))));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&](int w) {
    try {
      for (;;) {
        const std::size_t begin = next.fetch_add(block);
        if (begin >= count) break;
        const std::size_t end = std::min(count, begin + block);
        for (std::size_t i = begin; i < end; ++i) f(i, w);
      }
    } catch (...) {
      std::lock_guard lock(err_mu);
      if (!err) err = std::current_exception();
      next.store(count);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < jobs; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace tglab
