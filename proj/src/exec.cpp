#include "rwre/exec.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rwre {

namespace {

int initial_workers() {
  if (const char* env = std::getenv("RWRE_LAB_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int& workers_ref() {
  static int workers = initial_workers();
  return workers;
}

}  // namespace

int worker_count() { return workers_ref(); }

void set_worker_count(int workers) {
  if (workers < 1) throw std::invalid_argument("worker count must be >= 1, got " + std::to_string(workers));
  workers_ref() = workers;
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace rwre
