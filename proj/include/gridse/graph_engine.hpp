#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

#include "gridse/errors.hpp"
#include "gridse/network_model.hpp"

namespace gridse {

namespace detail {

// Runs fn(i) for i in [0, n) across `workers` threads in contiguous
// blocks. Each index is visited exactly once; fn must only write state
// owned by index i. The first exception (lowest index) wins.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t t = std::min<std::size_t>(workers, n);
  std::vector<std::pair<std::size_t, std::exception_ptr>> errors(
      t, {SIZE_MAX, nullptr});
  std::vector<std::thread> threads;
  threads.reserve(t);
  std::size_t chunk = (n + t - 1) / t;
  for (std::size_t w = 0; w < t; ++w) {
    std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    threads.emplace_back([&, w, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          fn(i);
        } catch (...) {
          errors[w] = {i, std::current_exception()};
          return;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  auto it = std::min_element(
      errors.begin(), errors.end(),
      [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it->second) std::rethrow_exception(it->second);
}

}  // namespace detail

// Read handle onto the outputs of the superstep in flight. Any read
// before the barrier is a contract violation and throws.
template <typename R>
class PeerReader {
public:
  PeerReader(const std::vector<R>& outputs, const std::atomic<bool>& sealed)
      : outputs_(outputs), sealed_(sealed) {}

  const R& operator[](std::size_t i) const {
    if (!sealed_.load(std::memory_order_acquire))
      throw SuperstepViolationError(
          "kernel read a peer output before the superstep barrier");
    return outputs_.at(i);
  }

private:
  const std::vector<R>& outputs_;
  const std::atomic<bool>& sealed_;
};

// One BSP superstep: kernel(i, peers) runs once per vertex, possibly
// concurrently; output[i] is privately owned until all vertices finish.
// Results are independent of worker count.
template <typename R, typename Kernel>
std::vector<R> vertex_map_guarded(const PowerGraph& g, Kernel&& kernel,
                                  int workers = 1) {
  std::vector<R> out(g.num_vertices());
  std::atomic<bool> sealed{false};
  PeerReader<R> peers(out, sealed);
  detail::parallel_for(g.num_vertices(), workers, [&](std::size_t i) {
    try {
      out[i] = kernel(i, peers);
    } catch (const std::exception& e) {
      throw StageError(i, e.what());
    }
  });
  sealed.store(true, std::memory_order_release);
  return out;
}

template <typename R, typename Kernel>
std::vector<R> vertex_map(const PowerGraph& g, Kernel&& kernel,
                          int workers = 1) {
  std::vector<R> out(g.num_vertices());
  detail::parallel_for(g.num_vertices(), workers, [&](std::size_t i) {
    try {
      out[i] = kernel(i);
    } catch (const std::exception& e) {
      throw StageError(i, e.what());
    }
  });
  return out;
}

// A row contribution from one vertex. Contributions are ordered by
// contributing vertex in the input list.
struct Accumulator {
  std::size_t row = 0;
  std::vector<std::pair<std::size_t, double>> entries;  // (column, value)
};

// Merges contributions per row: equal columns are summed in ascending
// (contributing vertex, column) order so the floating-point result is
// reproducible; output columns sorted ascending.
inline std::vector<std::vector<std::pair<std::size_t, double>>>
accumulate_rows(const std::vector<Accumulator>& contributions,
                std::size_t dim, int workers = 1) {
  std::vector<std::vector<std::pair<std::size_t, double>>> gathered(dim);
  for (const auto& c : contributions) {
    if (c.row >= dim)
      throw IndexOutOfRangeError("accumulate_rows: row out of range");
    for (const auto& [col, val] : c.entries) {
      if (col >= dim)
        throw IndexOutOfRangeError("accumulate_rows: column out of range");
      gathered[c.row].emplace_back(col, val);
    }
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> merged(dim);
  detail::parallel_for(dim, workers, [&](std::size_t r) {
    auto& g = gathered[r];
    // stable: preserves contributor order within equal columns
    std::stable_sort(g.begin(), g.end(), [](const auto& a, const auto& b) {
      return a.first < b.first;
    });
    auto& out = merged[r];
    for (std::size_t k = 0; k < g.size();) {
      std::size_t col = g[k].first;
      double sum = 0.0;
      while (k < g.size() && g[k].first == col) sum += g[k++].second;
      out.emplace_back(col, sum);
    }
  });
  return merged;
}

}  // namespace gridse
