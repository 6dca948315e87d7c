// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace delaytk {

// Worker count: DELAYTK_THREADS if set (>= 1), else hardware concurrency.
unsigned worker_count();

// Runs body(begin, end) over contiguous chunks of [0, count). Chunks are
// disjoint, so writes into per-index slots need no synchronization.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace delaytk
