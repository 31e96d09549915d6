#pragma once

#include <cstddef>
#include <functional>

namespace pose_forge {

// Worker count: POSE_FORGE_THREADS when set to a positive integer, otherwise
// the hardware concurrency.
std::size_t worker_count();

// Calls fn(i) for i in [0, n) on up to worker_count() threads. Work is
// handed out by index, so results written to slot i do not depend on the
// thread schedule. The exception of the lowest failing index is rethrown after
// all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pose_forge
