#pragma once

#include <cstdint>
#include <functional>

namespace tnv {

/// Worker pool with a deterministic-merge contract: parallel_for splits
/// [0,n) into one contiguous chunk per worker (worker w gets chunk w), so
/// callers can keep per-worker accumulators and merge them in worker-index
/// order. Results are then bitwise reproducible for a fixed worker count.
///
/// Worker count comes from TNV_THREADS (capped at hardware concurrency),
/// defaulting to hardware concurrency. With one worker everything runs
/// inline on the calling thread.
class ThreadPool {
 public:
  static ThreadPool& instance();

  int size() const { return size_; }

  /// fn(begin, end, worker) over a contiguous chunk. Blocks until done.
  /// Exceptions from workers are rethrown (first one wins).
  void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t, int)>& fn);

 private:
  explicit ThreadPool(int size) : size_(size) {}
  int size_;
};

}  // namespace tnv
