#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chive {

// Number of worker threads to use when the caller does not say.
inline int default_jobs() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Runs f(i) for i in [0, n). jobs <= 1 takes the plain serial loop, which is
// the reference path; the OpenMP path must only write to per-index slots so
// the result is identical regardless of schedule. Exceptions from worker
// iterations are rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
#ifdef _OPENMP
    if (jobs > 1 && n > 1) {
        std::exception_ptr error = nullptr;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            try {
                f(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace chive
