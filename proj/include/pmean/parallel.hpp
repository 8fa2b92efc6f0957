#pragma once

#include <cstddef>
#include <cstdint>

namespace pmean {

/// Thread budget for the OpenMP kernels: PMEAN_THREADS if set (>= 1),
/// otherwise the OpenMP default. Returns 1 when built without OpenMP.
int max_threads();

namespace detail {
void parallel_for_impl(std::size_t n, void (*body)(std::size_t, void*), void* ctx);
}

/// Parallel map over [0, n). Each index owns its output slot; the kernels
/// never reduce across iterations in parallel, so results are bit-identical
/// for every thread count.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    detail::parallel_for_impl(
        n, [](std::size_t i, void* ctx) { (*static_cast<F*>(ctx))(i); }, &f);
}

} // namespace pmean
