#include "roiattn/gemm.hpp"

#include <vector>

#include "roiattn/parallel.hpp"

namespace roiattn {

namespace {

thread_local std::vector<double> tls_acc;

inline double* acc_buffer(int n) {
    if (int(tls_acc.size()) < n) tls_acc.resize(n);
    return tls_acc.data();
}

}  // namespace

namespace {

// One output row: acc[j] += sum_p a_p * b[p, j], with the p loop unrolled
// by 4 to amortize accumulator traffic. Summation order over p is fixed
// regardless of unrolling seam (each acc[j] sees p in increasing order).
inline void row_kernel(const float* __restrict a_vals, int a_stride, int k,
                       const float* __restrict b, int ldb, double* __restrict acc, int n) {
    int p = 0;
    for (; p + 4 <= k; p += 4) {
        const double a0 = a_vals[int64_t(p) * a_stride];
        const double a1 = a_vals[int64_t(p + 1) * a_stride];
        const double a2 = a_vals[int64_t(p + 2) * a_stride];
        const double a3 = a_vals[int64_t(p + 3) * a_stride];
        const float* b0 = b + int64_t(p) * ldb;
        const float* b1 = b + int64_t(p + 1) * ldb;
        const float* b2 = b + int64_t(p + 2) * ldb;
        const float* b3 = b + int64_t(p + 3) * ldb;
        for (int j = 0; j < n; ++j) {
            acc[j] += ((a0 * double(b0[j]) + a1 * double(b1[j])) +
                       (a2 * double(b2[j]) + a3 * double(b3[j])));
        }
    }
    for (; p < k; ++p) {
        const double av = a_vals[int64_t(p) * a_stride];
        const float* brow = b + int64_t(p) * ldb;
        for (int j = 0; j < n; ++j) acc[j] += av * double(brow[j]);
    }
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    parallel_for_chunks(0, m, [=](int64_t i0, int64_t i1) {
        double* acc = acc_buffer(n);
        for (int64_t i = i0; i < i1; ++i) {
            const float* arow = a + i * lda;
            float* crow = c + i * ldc;
            if (accumulate) {
                for (int j = 0; j < n; ++j) acc[j] = crow[j];
            } else {
                for (int j = 0; j < n; ++j) acc[j] = 0.0;
            }
            row_kernel(arow, 1, k, b, ldb, acc, n);
            for (int j = 0; j < n; ++j) crow[j] = float(acc[j]);
        }
    });
}

void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate) {
    parallel_for_chunks(0, m, [=](int64_t i0, int64_t i1) {
        double* acc = acc_buffer(n);
        for (int64_t i = i0; i < i1; ++i) {
            float* crow = c + i * ldc;
            if (accumulate) {
                for (int j = 0; j < n; ++j) acc[j] = crow[j];
            } else {
                for (int j = 0; j < n; ++j) acc[j] = 0.0;
            }
            row_kernel(a + i, lda, k, b, ldb, acc, n);
            for (int j = 0; j < n; ++j) crow[j] = float(acc[j]);
        }
    });
}

void transpose(const float* src, float* dst, int m, int n) {
    parallel_for_chunks(0, m, [=](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            const float* srow = src + i * n;
            for (int j = 0; j < n; ++j) dst[int64_t(j) * m + i] = srow[j];
        }
    });
}

}  // namespace roiattn
