#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <functional>
#include <cstddef>

namespace loads {

// Runs body(0) .. body(count-1) on up to `workers` threads. Units are
// independent; callers write results into pre-sized slots indexed by the
// unit id and reduce serially afterwards, so outputs never depend on the
// worker count. The first exception (by lowest unit index) is rethrown
// after all threads join.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& body);

} // namespace loads
