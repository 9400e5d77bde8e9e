#include "bracket/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bracket {

namespace {

std::size_t initial_max_threads() {
  if (const char* env = std::getenv("BRACKET_ATT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return 1;
}

std::atomic<std::size_t>& thread_cap() {
  static std::atomic<std::size_t> cap{initial_max_threads()};
  return cap;
}

}  // namespace

std::size_t max_threads() { return thread_cap().load(std::memory_order_relaxed); }

void set_max_threads(std::size_t n) {
  thread_cap().store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

namespace detail {

void parallel_for_impl(std::size_t n, std::size_t n_threads,
                       const std::function<void(std::size_t)>& body) {
  const std::size_t workers = n_threads < n ? n_threads : n;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      const std::size_t lo = n * w / workers;
      const std::size_t hi = n * (w + 1) / workers;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

}  // namespace bracket
