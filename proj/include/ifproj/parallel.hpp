#ifndef IFPROJ_PARALLEL_HPP
#define IFPROJ_PARALLEL_HPP

#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ifproj {

// jobs == 0 -> library default; jobs == 1 -> strictly serial
inline int resolve_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs <= 0) return omp_get_max_threads();
  return jobs;
#else
  (void)jobs;
  return 1;
#endif
}

// Map a pure per-index function over [0, n). Each index writes only its own
// outputs, so the result is bit-identical for every jobs value; jobs only
// changes who computes what. Exceptions are caught per index and the one with
// the lowest index is rethrown, so failures too are independent of jobs.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = resolve_jobs(jobs);
#ifdef _OPENMP
  if (jobs > 1) {
    std::vector<std::exception_ptr> errs(n);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
    for (int i = 0; i < n; ++i)
      if (errs[i]) std::rethrow_exception(errs[i]);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace ifproj

#endif
