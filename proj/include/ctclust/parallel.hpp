#pragma once

#include <functional>

namespace ctclust {

/// Worker count from CTCLUST_THREADS (default: hardware concurrency).
int worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Callers
/// must make iterations independent; the first exception is rethrown.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace ctclust
