#include "pmean/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pmean {

int max_threads() {
#ifdef _OPENMP
    if (const char* env = std::getenv("PMEAN_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<int>(v);
    }
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace detail {

void parallel_for_impl(std::size_t n, void (*body)(std::size_t, void*), void* ctx) {
    const int threads = max_threads();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i, ctx);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        body(static_cast<std::size_t>(i), ctx);
#else
    for (std::size_t i = 0; i < n; ++i) body(i, ctx);
#endif
}

} // namespace detail
} // namespace pmean
