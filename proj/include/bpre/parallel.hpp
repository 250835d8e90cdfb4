#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bpre {

inline unsigned resolve_thread_count(unsigned requested) {
  if (requested != 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Fixed number of replicas per work chunk. Chunk boundaries depend only on the
// replica count, never on the worker count, so anything accumulated into
// chunk-indexed storage and reduced in chunk order is bit-identical for every
// --threads value.
inline constexpr std::size_t kReplicaChunk = 2048;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size = kReplicaChunk) {
  return (n + chunk_size - 1) / chunk_size;
}

// Runs fn(chunk_index, begin, end) for every chunk of [0, n).
template <typename Fn>
void for_each_chunk(std::size_t n, unsigned threads, Fn&& fn,
                    std::size_t chunk_size = kReplicaChunk) {
  if (n == 0) return;
  const std::size_t n_chunks = chunk_count(n, chunk_size);
  unsigned workers = resolve_thread_count(threads);
  if (workers > n_chunks) workers = static_cast<unsigned>(n_chunks);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = begin + chunk_size < n ? begin + chunk_size : n;
    fn(c, begin, end);
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      try {
        run_chunk(c);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Parallel index loop over [0, n) without chunk bookkeeping; fn(i) must only
// write to slot i of preallocated storage.
template <typename Fn>
void parallel_index(std::size_t n, unsigned threads, Fn&& fn,
                    std::size_t grain = 1024) {
  for_each_chunk(
      n, threads,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      },
      grain);
}

}  // namespace bpre
