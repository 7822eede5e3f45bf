#pragma once

#include <cstddef>
#include <functional>

namespace curvesplat {

/// Process-wide default worker count (0 = hardware concurrency). The CLI
/// --workers flag routes here.
int default_workers();
void set_default_workers(int workers);

/// Run fn(i) for i in [0,n) on up to `workers` threads (0 = default). Work is
/// statically chunked; callers are responsible for making writes disjoint.
/// Results must not depend on the partition.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace curvesplat
