#pragma once
#include <cstddef>
#include <functional>

namespace ssrlab {

// Worker count for a request; 0 means one per hardware thread.
int resolve_threads(int requested);

// Runs body(i) for i in [0, count) on up to `threads` workers. Tasks are
// claimed dynamically; callers write results into index-addressed slots so the
// outcome does not depend on scheduling. The exception of the lowest failing
// index is rethrown after all workers finish.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace ssrlab
