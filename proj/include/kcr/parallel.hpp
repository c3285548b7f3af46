#ifndef KCR_PARALLEL_HPP
#define KCR_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace kcr {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> n{1};
  return n;
}
}  // namespace detail

/// Worker count used by the row-parallel kernels. 1 is the reference path.
inline unsigned num_threads() { return detail::thread_setting().load(std::memory_order_relaxed); }

inline void set_num_threads(unsigned n) {
  detail::thread_setting().store(std::max(1u, n), std::memory_order_relaxed);
}

/// Runs fn(begin, end) over disjoint contiguous chunks of [0, count).
/// Each index is handled by exactly one call, so kernels that keep their
/// per-element summation order inside fn stay bitwise independent of the
/// worker count.
template <typename Fn>
void parallel_rows(std::size_t count, std::size_t work_per_row, Fn&& fn) {
  const unsigned workers = num_threads();
  constexpr std::size_t kMinWork = 1 << 15;
  if (workers <= 1 || count < 2 || count * work_per_row < kMinWork) {
    fn(std::size_t{0}, count);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(workers, count);
  const std::size_t step = (count + chunks - 1) / chunks;
  std::vector<std::jthread> pool;
  pool.reserve(chunks - 1);
  for (std::size_t c = 1; c < chunks; ++c) {
    const std::size_t lo = c * step;
    const std::size_t hi = std::min(count, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(std::size_t{0}, std::min(count, step));
}

}  // namespace kcr

#endif  // KCR_PARALLEL_HPP
