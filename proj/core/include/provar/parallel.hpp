#pragma once

#include <cstddef>
#include <functional>

namespace provar {

/// Worker count from PROVAR_WORKERS, else the hardware concurrency (>= 1).
std::size_t default_workers();

/// Runs body(i) for i in [0, count) on up to `workers` threads. Each index
/// runs exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling. The exception from the lowest
/// failing index, if any, is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace provar
