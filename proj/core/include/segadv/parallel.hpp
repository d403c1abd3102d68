#pragma once

#include <cstddef>
#include <functional>

namespace segadv {

/// Worker count: SEGADV_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t worker_count();

/// Runs body(k) for k in [0, n). Each index must only write state owned by
/// that index; callers reduce the per-index results in index order so the
/// outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace segadv
