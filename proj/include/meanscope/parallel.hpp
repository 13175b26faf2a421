#pragma once

// Chunked parallel sampling. MEANSCOPE_THREADS caps the worker count;
// because every sample is a pure function of its index and verdict
// aggregation is an associative, commutative reduction, the thread count
// affects speed only, never results.

#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace meanscope {

inline int worker_count() {
    if (const char* env = std::getenv("MEANSCOPE_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return int(n > 64 ? 64 : n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Runs fn(begin, end, acc) over disjoint chunks of [0, n) and merges the
// per-chunk accumulators in chunk order.
template <typename Acc, typename ChunkFn, typename MergeFn>
Acc parallel_accumulate(uint64_t n, Acc init, ChunkFn chunk_fn, MergeFn merge) {
    int workers = worker_count();
    if (workers <= 1 || n < 512) {
        Acc acc = init;
        chunk_fn(uint64_t(0), n, acc);
        return acc;
    }
    std::vector<Acc> parts(std::size_t(workers), init);
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    uint64_t per = (n + uint64_t(workers) - 1) / uint64_t(workers);
    for (int w = 0; w < workers; ++w) {
        uint64_t b = uint64_t(w) * per;
        uint64_t e = std::min(n, b + per);
        if (b >= e) break;
        pool.emplace_back([&, b, e, w] { chunk_fn(b, e, parts[std::size_t(w)]); });
    }
    for (auto& t : pool) t.join();
    Acc acc = init;
    for (auto& p : parts) merge(acc, p);
    return acc;
}

}  // namespace meanscope
