#pragma once

#include <cstdint>
#include <functional>

namespace deblur::nn {

// Worker count: DEBLUR_THREADS env var, else hardware concurrency.
int thread_count();

// Runs fn over contiguous sub-ranges of [begin, end). Ranges never overlap,
// so results are bit-identical for any worker count.
void parallel_for(int64_t begin, int64_t end, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn);

// Row-major C[M,N] = (or +=) A[M,K] * B[K,N].
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
             const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate);

// Row-major blocked transpose: out[j,i] = in[i,j], in is rows x cols.
template <typename T>
void transpose(const T* in, int64_t rows, int64_t cols, T* out);

}  // namespace deblur::nn
