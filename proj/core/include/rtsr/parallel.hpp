#pragma once

#include <cstdint>
#include <functional>

namespace rtsr {

/// Worker count used by the heavy kernels. Defaults to 1.
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, count) split into contiguous chunks. Every index is
/// processed by exactly one worker, so results do not depend on the thread count
/// as long as body(i) only writes state owned by i.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body);

}  // namespace rtsr
