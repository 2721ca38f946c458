#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

namespace homtom {
namespace parallel {

// Work is split into fixed 4096-element chunks.  Threads claim chunks
// dynamically, but all outputs are keyed by chunk index and combined in
// chunk order, so results do not depend on the number of workers.
constexpr std::size_t kChunkSize = 4096;

inline unsigned resolve_jobs(unsigned requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline std::size_t chunk_count(std::size_t n) {
  return (n + kChunkSize - 1) / kChunkSize;
}

// fn(chunk_index, begin, end) must only touch state owned by its chunk.
template <class Fn>
void for_chunks(std::size_t count, unsigned jobs, Fn&& fn) {
  const std::size_t nchunks = chunk_count(count);
  jobs = resolve_jobs(jobs);
  if (jobs <= 1 || nchunks <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) {
      fn(c, c * kChunkSize, std::min(count, (c + 1) * kChunkSize));
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      try {
        fn(c, c * kChunkSize, std::min(count, (c + 1) * kChunkSize));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  const unsigned nthreads = static_cast<unsigned>(
      std::min<std::size_t>(jobs, nchunks));
  pool.reserve(nthreads);
  for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// map(chunk_index, begin, end) -> Partial, folded left-to-right in chunk
// order: reduce(reduce(init, P0), P1)...  Deterministic for any job count.
template <class Partial, class MapFn, class ReduceFn>
Partial map_reduce(std::size_t count, unsigned jobs, MapFn&& map,
                   Partial init, ReduceFn&& reduce) {
  const std::size_t nchunks = chunk_count(count);
  std::vector<std::optional<Partial>> parts(nchunks);
  for_chunks(count, jobs, [&](std::size_t c, std::size_t b, std::size_t e) {
    parts[c] = map(c, b, e);
  });
  Partial acc = std::move(init);
  for (std::size_t c = 0; c < nchunks; ++c) {
    acc = reduce(std::move(acc), std::move(*parts[c]));
  }
  return acc;
}

}  // namespace parallel
}  // namespace homtom
