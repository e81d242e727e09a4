#pragma once

#include <exception>

namespace moltk::detail {

/// Exceptions cannot unwind through an OpenMP region; capture the first one
/// and rethrow after the join.
struct OmpGuard {
  std::exception_ptr eptr = nullptr;

  template <typename F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
#pragma omp critical(moltk_omp_guard)
      if (!eptr) eptr = std::current_exception();
    }
  }

  void rethrow() const {
    if (eptr) std::rethrow_exception(eptr);
  }
};

}  // namespace moltk::detail
