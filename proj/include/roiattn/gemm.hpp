#pragma once

namespace roiattn {

// C(m×n) = A(m×k) · B(k×n), optionally accumulating into C. Row-major,
// arbitrary leading dimensions. Each output element is reduced in a
// 64-bit partial, in a fixed k order, so results are identical for any
// thread count.
void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);

// C(m×n) = Aᵀ · B where A is stored (k×m) row-major. Same reduction
// contract as gemm_nn.
void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, bool accumulate);

// dst(n×m) = srcᵀ where src is (m×n) row-major.
void transpose(const float* src, float* dst, int m, int n);

}  // namespace roiattn
