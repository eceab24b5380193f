// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace wsa {

// Worker count from WSA_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

// Runs body(i) for i in [0, n). Iterations must be independent; each writes
// only its own outputs, so results are identical to the sequential loop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wsa
