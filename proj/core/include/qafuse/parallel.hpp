#pragma once

#include <cstddef>
#include <functional>

namespace qafuse {

/// Calls fn(i) for every i in [0, n) on at most `jobs` threads. Each call must
/// only write state owned by index i. If calls throw, the exception of the
/// smallest failing index is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace qafuse
