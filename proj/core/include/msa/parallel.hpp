#pragma once

#include <cstdint>
#include <functional>

namespace msa {

// Deterministic data parallelism. parallel_for splits [0,n) into one
// contiguous chunk per worker; the partition depends only on (n, thread
// count), never on scheduling, so any op built from independent per-index
// writes produces bitwise-identical results run to run. Reductions must be
// expressed as per-chunk buffers combined in chunk order by the caller.
//
// Thread count is process-global. 1 (the default) means strictly sequential
// execution on the calling thread.
void set_num_threads(int n);
int num_threads();

// fn(begin, end, chunk_index); chunk_index in [0, chunk_count).
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t, int)>& fn);

// Number of chunks parallel_for will use for a given n.
int chunk_count(std::int64_t n);

}  // namespace msa
