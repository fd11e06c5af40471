#pragma once

#include <cstddef>
#include <functional>

namespace hetrel {

// Worker count: HETREL_THREADS when set to a positive integer, otherwise the
// hardware concurrency.
std::size_t thread_count();

// Runs body(i) for i in [0, n) across thread_count() workers. Each index is
// handled exactly once; callers write only to per-index slots, so results do
// not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hetrel
