#pragma once

#include <cstdint>
#include <functional>

namespace roiattn {

// Number of worker threads in use. Resolved from ROIATTN_THREADS on first
// call (0 or unset = hardware concurrency).
int thread_count();

// Override the thread count programmatically (takes effect immediately;
// 0 = auto). Not safe to call while a parallel_for is in flight.
void set_thread_count(int n);

// Splits [begin, end) into one contiguous chunk per worker and runs
// fn(i) for every index. Results must not depend on the partitioning:
// each index writes only its own outputs, so any thread count produces
// identical results.
void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t)>& fn);

// Chunked variant: fn(chunk_begin, chunk_end) per worker. Lower overhead
// for tight loops.
void parallel_for_chunks(int64_t begin, int64_t end,
                         const std::function<void(int64_t, int64_t)>& fn);

}  // namespace roiattn
