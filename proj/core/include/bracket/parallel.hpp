#pragma once

#include <cstddef>
#include <functional>

namespace bracket {

/**
 * Worker cap for parallel_for. Defaults to the BRACKET_ATT_THREADS environment
 * variable when set (and >= 1), else 1. Never consulted mid-loop: each
 * parallel_for call reads it once at entry.
 */
std::size_t max_threads();
void set_max_threads(std::size_t n);

namespace detail {
void parallel_for_impl(std::size_t n, std::size_t n_threads,
                       const std::function<void(std::size_t)>& body);
}  // namespace detail

/**
 * Evaluate body(i) for i in [0, n), split across up to max_threads() workers
 * in contiguous index blocks.
 *
 * Determinism contract: body(i) must write only to state owned by index i
 * (e.g. out[i]); under that discipline results are bit-identical for any
 * thread count, because no cross-index reduction order exists. The first
 * exception thrown by any body is rethrown on the calling thread.
 */
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t workers = max_threads();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  detail::parallel_for_impl(n, workers, std::function<void(std::size_t)>(body));
}

}  // namespace bracket
