#pragma once

#include <cstdint>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hapnet {

// Record-level work is split into fixed-size chunks and chunk results are
// always combined in chunk-index order, so serial and OpenMP execution are
// bit-identical and the OpenMP schedule cannot leak into outputs.
enum class ExecMode { serial, parallel };

inline constexpr int kChunk = 8;

inline int chunk_count(int64_t n) {
    return static_cast<int>((n + kChunk - 1) / kChunk);
}

// fn(chunk_index, begin, end) — begin/end index the flat record range.
template <typename Fn>
void for_chunks(int64_t n, ExecMode mode, Fn&& fn) {
    int nc = chunk_count(n);
#ifdef _OPENMP
    if (mode == ExecMode::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int c = 0; c < nc; ++c) {
            int64_t b = static_cast<int64_t>(c) * kChunk;
            int64_t e = b + kChunk < n ? b + kChunk : n;
            fn(c, b, e);
        }
        return;
    }
#else
    (void)mode;
#endif
    for (int c = 0; c < nc; ++c) {
        int64_t b = static_cast<int64_t>(c) * kChunk;
        int64_t e = b + kChunk < n ? b + kChunk : n;
        fn(c, b, e);
    }
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace hapnet
