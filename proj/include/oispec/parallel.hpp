#pragma once

#include <cstddef>
#include <functional>

namespace oispec {

/// Caps the number of worker threads used by parallel_for. 0 restores the
/// default (hardware concurrency).
void set_max_threads(int n);

int max_threads();

/// Runs body(begin, end) over a static partition of [0, n). Chunks are
/// contiguous and each invocation owns a disjoint range, so results are
/// identical for any thread count as long as the body only writes to
/// indices inside its range.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace oispec
