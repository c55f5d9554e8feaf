#include "deblur/nn/gemm.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <thread>
#include <vector>

namespace deblur::nn {

int thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("DEBLUR_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
  }();
  return n;
}

void parallel_for(int64_t begin, int64_t end, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn) {
  const int64_t total = end - begin;
  if (total <= 0) return;
  const int nt = thread_count();
  if (nt <= 1 || total <= grain) {
    fn(begin, end);
    return;
  }
  const int64_t want = (total + grain - 1) / grain;
  const int workers = static_cast<int>(std::min<int64_t>(nt, want));
  const int64_t step = (total + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) {
    int64_t lo = begin + t * step;
    int64_t hi = std::min(end, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(begin, std::min(end, begin + step));
  for (auto& th : pool) th.join();
}

namespace {

// Serial tile: C[i0..i1) rows. k-outer, 4-row broadcast, j innermost so the
// compiler turns the body into FMA over contiguous B and C rows.
template <typename T>
void gemm_rows(int64_t i0, int64_t i1, int64_t n, int64_t k, const T* a,
               int64_t lda, const T* b, int64_t ldb, T* c, int64_t ldc,
               bool accumulate) {
  constexpr int64_t IT = 4;
  for (int64_t i = i0; i < i1; i += IT) {
    const int64_t rows = std::min(IT, i1 - i);
    if (!accumulate)
      for (int64_t r = 0; r < rows; ++r)
        std::memset(c + (i + r) * ldc, 0, sizeof(T) * n);
    if (rows == IT) {
      T* c0 = c + (i + 0) * ldc;
      T* c1 = c + (i + 1) * ldc;
      T* c2 = c + (i + 2) * ldc;
      T* c3 = c + (i + 3) * ldc;
      const T* a0 = a + (i + 0) * lda;
      const T* a1 = a + (i + 1) * lda;
      const T* a2 = a + (i + 2) * lda;
      const T* a3 = a + (i + 3) * lda;
      for (int64_t kk = 0; kk < k; ++kk) {
        const T v0 = a0[kk], v1 = a1[kk], v2 = a2[kk], v3 = a3[kk];
        const T* brow = b + kk * ldb;
        for (int64_t j = 0; j < n; ++j) {
          const T bv = brow[j];
          c0[j] += v0 * bv;
          c1[j] += v1 * bv;
          c2[j] += v2 * bv;
          c3[j] += v3 * bv;
        }
      }
    } else {
      for (int64_t r = 0; r < rows; ++r) {
        T* cr = c + (i + r) * ldc;
        const T* ar = a + (i + r) * lda;
        for (int64_t kk = 0; kk < k; ++kk) {
          const T v = ar[kk];
          const T* brow = b + kk * ldb;
          for (int64_t j = 0; j < n; ++j) cr[j] += v * brow[j];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
             const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
  // Grain keeps per-thread work above ~1 MFLOP so tiny GEMMs stay serial.
  const int64_t grain = std::max<int64_t>(4, 500000 / std::max<int64_t>(1, n * k));
  parallel_for(0, m, grain, [&](int64_t i0, int64_t i1) {
    gemm_rows(i0, i1, n, k, a, lda, b, ldb, c, ldc, accumulate);
  });
}

template <typename T>
void transpose(const T* in, int64_t rows, int64_t cols, T* out) {
  constexpr int64_t B = 32;
  parallel_for(0, (rows + B - 1) / B, 1, [&](int64_t t0, int64_t t1) {
    for (int64_t bi = t0; bi < t1; ++bi) {
      const int64_t i0 = bi * B, i1 = std::min(rows, i0 + B);
      for (int64_t j0 = 0; j0 < cols; j0 += B) {
        const int64_t j1 = std::min(cols, j0 + B);
        for (int64_t i = i0; i < i1; ++i)
          for (int64_t j = j0; j < j1; ++j) out[j * rows + i] = in[i * cols + j];
      }
    }
  });
}

template void gemm_nn<float>(int64_t, int64_t, int64_t, const float*, int64_t,
                             const float*, int64_t, float*, int64_t, bool);
template void gemm_nn<double>(int64_t, int64_t, int64_t, const double*, int64_t,
                              const double*, int64_t, double*, int64_t, bool);
template void transpose<float>(const float*, int64_t, int64_t, float*);
template void transpose<double>(const double*, int64_t, int64_t, double*);

}  // namespace deblur::nn
