#include "rtsr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace rtsr {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int threads) { g_threads.store(std::max(1, threads)); }

int thread_count() { return g_threads.load(); }

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body) {
    const int threads = static_cast<int>(std::min<std::int64_t>(thread_count(), count));
    if (threads <= 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(static_cast<std::size_t>(threads));
    const std::int64_t chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::int64_t begin = t * chunk;
        const std::int64_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([begin, end, &body] {
            for (std::int64_t i = begin; i < end; ++i) body(i);
        });
    }
}

}  // namespace rtsr
