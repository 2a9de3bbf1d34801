#pragma once

#include <cstddef>
#include <functional>

namespace flowam {

// Worker count used by parallel_for. Defaults to FLOWCTL_THREADS if set, else hardware concurrency.
int worker_count();
void set_worker_count(int n);

// Runs body(i) for i in [0, n). Each index writes only its own output slot, so results never depend
// on the worker count. If any body throws, the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace flowam
