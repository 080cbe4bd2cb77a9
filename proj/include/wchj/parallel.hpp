#pragma once

namespace wchj {

/// Worker threads used by per-slice sweeps. Defaults to the WCHJ_THREADS
/// environment variable, else the OpenMP default (1 without OpenMP).
int worker_threads();
void set_worker_threads(int n);

}  // namespace wchj
