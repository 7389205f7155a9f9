#pragma once

#include <cstddef>
#include <functional>

namespace hsdf {

/// Worker count from HSDF_THREADS (0 or unset = hardware concurrency).
int worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Every index is
/// visited exactly once; bodies must write only to their own index range so
/// results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace hsdf
