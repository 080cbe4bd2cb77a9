#include "wchj/parallel.hpp"

#include <algorithm>
#include <cstdlib>

#ifdef WCHJ_HAVE_OPENMP
#include <omp.h>
#endif

namespace wchj {

namespace {

int initial_threads() {
  int n = 1;
#ifdef WCHJ_HAVE_OPENMP
  n = omp_get_max_threads();
#endif
  if (const char* env = std::getenv("WCHJ_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(n, 1);
}

int& thread_setting() {
  static int n = initial_threads();
  return n;
}

}  // namespace

int worker_threads() { return thread_setting(); }

void set_worker_threads(int n) { thread_setting() = std::max(n, 1); }

}  // namespace wchj
