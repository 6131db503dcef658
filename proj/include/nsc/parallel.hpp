#pragma once

#include <cstddef>
#include <functional>

namespace nsc {

/// Worker cap for parallel_for; 0 restores the default (hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(i) for i in [0, n) on up to max_threads() workers. Indices are
/// handed out dynamically, so bodies must not depend on execution order.
/// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nsc
