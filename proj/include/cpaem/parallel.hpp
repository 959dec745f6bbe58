#pragma once

#include <cstddef>
#include <functional>

namespace cpaem {

/// Worker count: explicit override if set, else CPAEM_THREADS, else hardware.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n) on up to thread_count() workers with a static
/// contiguous split. Each index is visited exactly once; callers write into
/// per-index slots so results never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cpaem
