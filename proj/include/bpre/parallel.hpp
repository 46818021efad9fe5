#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bpre {

/// Runs fn(shard) for shard in [0, n_shards) on `workers` threads and returns
/// the results indexed by shard. Shards are claimed dynamically, so callers
/// must derive all randomness from the shard index, never from the thread.
template <class Result, class Fn>
std::vector<Result> run_shards(std::int64_t n_shards, int workers, Fn&& fn) {
  std::vector<Result> results(static_cast<std::size_t>(std::max<std::int64_t>(n_shards, 0)));
  if (n_shards <= 0) return results;
  const int threads =
      static_cast<int>(std::clamp<std::int64_t>(workers < 1 ? 1 : workers, 1, n_shards));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::int64_t shard = next.fetch_add(1);
      if (shard >= n_shards) return;
      try {
        results[static_cast<std::size_t>(shard)] = fn(shard);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_shards);
        return;
      }
    }
  };
  if (threads == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

/// Number of fixed-size shards covering `samples`.
inline std::int64_t shard_count(std::int64_t samples, std::int64_t shard_size) {
  return samples <= 0 ? 0 : (samples + shard_size - 1) / shard_size;
}

/// Samples handled by `shard`.
inline std::int64_t shard_length(std::int64_t shard, std::int64_t samples,
                                 std::int64_t shard_size) {
  return std::min(shard_size, samples - shard * shard_size);
}

int default_workers();

}  // namespace bpre
