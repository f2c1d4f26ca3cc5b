#pragma once

#include <cstdint>

namespace rwre {

/// Selects between the OpenMP kernels and the serial reference kernels they
/// are tested against. Both produce bitwise identical results.
enum class Exec { serial, parallel };

/// Number of OpenMP workers used by Exec::parallel kernels. Defaults to the
/// RWRE_LAB_WORKERS environment variable, else the OpenMP runtime default.
int worker_count();
void set_worker_count(int workers);

/// True when the library was built with OpenMP support.
bool openmp_enabled();

}  // namespace rwre
