// AVX2+FMA variants of the float kernels. Compiled with -mavx2 -mfma on x86
// only; the dispatcher installs them when CPUID reports support. Each kernel
// computes exactly what the scalar reference computes (up to FMA rounding and
// reassociation), which the equivalence tests in tests/test_kernels.cpp pin.
#include <immintrin.h>

#include <cstring>

#include "patx/kernels_ref.hpp"
#include "patx/kernels_table.hpp"

namespace patx::kernels {

namespace {

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  return _mm_cvtss_f32(lo);
}

inline void scale_rows(int m, int n, float beta, float* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    if (beta == 0.0f)
      std::memset(crow, 0, sizeof(float) * static_cast<std::size_t>(n));
    else if (beta != 1.0f)
      for (int j = 0; j < n; ++j) crow[j] *= beta;
  }
}

// C += alpha * A * B over the given index ranges; scalar remainder helper.
inline void accum_nn(int i0, int i1, int j0, int j1, int k, float alpha, const float* a,
                     int lda, const float* b, int ldb, float* c, int ldc) {
  for (int i = i0; i < i1; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const float av = alpha * a[static_cast<std::size_t>(i) * lda + p];
      const float* brow = b + static_cast<std::size_t>(p) * ldb;
      for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
    }
  }
}

inline void accum_tn(int i0, int i1, int j0, int j1, int k, float alpha, const float* a,
                     int lda, const float* b, int ldb, float* c, int ldc) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<std::size_t>(p) * lda;
    const float* brow = b + static_cast<std::size_t>(p) * ldb;
    for (int i = i0; i < i1; ++i) {
      const float av = alpha * arow[i];
      float* crow = c + static_cast<std::size_t>(i) * ldc;
      for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
    }
  }
}

// 4x16 register tile, k innermost: acc[r] covers C[i0+r, j..j+15].
// a_step selects row-major (nn: a[i*lda+p]) vs transposed (tn: a[p*lda+i]).
template <bool kTransA>
void gemm_axpy_avx2(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
                    int ldb, float beta, float* c, int ldc) {
  scale_rows(m, n, beta, c, ldc);
  const __m256 valpha = _mm256_set1_ps(alpha);
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256 acc[4][2];
      for (int r = 0; r < 4; ++r) {
        acc[r][0] = _mm256_setzero_ps();
        acc[r][1] = _mm256_setzero_ps();
      }
      for (int p = 0; p < k; ++p) {
        const float* brow = b + static_cast<std::size_t>(p) * ldb + j;
        const __m256 b0 = _mm256_loadu_ps(brow);
        const __m256 b1 = _mm256_loadu_ps(brow + 8);
        for (int r = 0; r < 4; ++r) {
          const float av = kTransA ? a[static_cast<std::size_t>(p) * lda + i + r]
                                   : a[static_cast<std::size_t>(i + r) * lda + p];
          const __m256 va = _mm256_set1_ps(av);
          acc[r][0] = _mm256_fmadd_ps(va, b0, acc[r][0]);
          acc[r][1] = _mm256_fmadd_ps(va, b1, acc[r][1]);
        }
      }
      for (int r = 0; r < 4; ++r) {
        float* crow = c + static_cast<std::size_t>(i + r) * ldc + j;
        _mm256_storeu_ps(crow, _mm256_fmadd_ps(valpha, acc[r][0], _mm256_loadu_ps(crow)));
        _mm256_storeu_ps(crow + 8, _mm256_fmadd_ps(valpha, acc[r][1], _mm256_loadu_ps(crow + 8)));
      }
    }
    if (j < n) {
      if (kTransA)
        accum_tn(i, i + 4, j, n, k, alpha, a, lda, b, ldb, c, ldc);
      else
        accum_nn(i, i + 4, j, n, k, alpha, a, lda, b, ldb, c, ldc);
    }
  }
  if (i < m) {
    if (kTransA)
      accum_tn(i, m, 0, n, k, alpha, a, lda, b, ldb, c, ldc);
    else
      accum_nn(i, m, 0, n, k, alpha, a, lda, b, ldb, c, ldc);
  }
}

void gemm_nn_avx2(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
                  int ldb, float beta, float* c, int ldc) {
  gemm_axpy_avx2<false>(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm_tn_avx2(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
                  int ldb, float beta, float* c, int ldc) {
  gemm_axpy_avx2<true>(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// Dot-product form for C = alpha*A*B^T + beta*C with B stored NxK.
void gemm_nt_avx2(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
                  int ldb, float beta, float* c, int ldc) {
  scale_rows(m, n, beta, c, ldc);
  const int ktail = k & 7;
  const int kmain = k - ktail;
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    int j = 0;
    for (; j + 2 <= n; j += 2) {
      __m256 acc[4][2];
      for (int r = 0; r < 4; ++r) {
        acc[r][0] = _mm256_setzero_ps();
        acc[r][1] = _mm256_setzero_ps();
      }
      for (int p = 0; p < kmain; p += 8) {
        const __m256 vb0 = _mm256_loadu_ps(b + static_cast<std::size_t>(j) * ldb + p);
        const __m256 vb1 = _mm256_loadu_ps(b + static_cast<std::size_t>(j + 1) * ldb + p);
        for (int r = 0; r < 4; ++r) {
          const __m256 va = _mm256_loadu_ps(a + static_cast<std::size_t>(i + r) * lda + p);
          acc[r][0] = _mm256_fmadd_ps(va, vb0, acc[r][0]);
          acc[r][1] = _mm256_fmadd_ps(va, vb1, acc[r][1]);
        }
      }
      for (int r = 0; r < 4; ++r) {
        for (int t = 0; t < 2; ++t) {
          float sum = hsum8(acc[r][t]);
          const float* arow = a + static_cast<std::size_t>(i + r) * lda;
          const float* brow = b + static_cast<std::size_t>(j + t) * ldb;
          for (int p = kmain; p < k; ++p) sum += arow[p] * brow[p];
          c[static_cast<std::size_t>(i + r) * ldc + j + t] += alpha * sum;
        }
      }
    }
    for (; j < n; ++j) {
      const float* brow = b + static_cast<std::size_t>(j) * ldb;
      for (int r = 0; r < 4; ++r) {
        const float* arow = a + static_cast<std::size_t>(i + r) * lda;
        float sum = 0.0f;
        for (int p = 0; p < k; ++p) sum += arow[p] * brow[p];
        c[static_cast<std::size_t>(i + r) * ldc + j] += alpha * sum;
      }
    }
  }
  for (; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * lda;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<std::size_t>(j) * ldb;
      float sum = 0.0f;
      for (int p = 0; p < k; ++p) sum += arow[p] * brow[p];
      c[static_cast<std::size_t>(i) * ldc + j] += alpha * sum;
    }
  }
}

void axpy_avx2(std::size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void relu_avx2(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(zero, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_grad_avx2(std::size_t n, const float* x, const float* gy, float* gx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(gy + i));
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
  }
  for (; i < n; ++i) gx[i] += x[i] > 0.0f ? gy[i] : 0.0f;
}

void lrelu_avx2(std::size_t n, float slope, const float* x, float* y) {
  const __m256 vs = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vx = _mm256_loadu_ps(x + i);
    const __m256 neg = _mm256_mul_ps(vs, vx);
    const __m256 mask = _mm256_cmp_ps(vx, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, vx, mask));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void lrelu_grad_avx2(std::size_t n, float slope, const float* x, const float* gy, float* gx) {
  const __m256 vs = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vg = _mm256_loadu_ps(gy + i);
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_blendv_ps(_mm256_mul_ps(vs, vg), vg, mask);
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
  }
  for (; i < n; ++i) gx[i] += x[i] > 0.0f ? gy[i] : slope * gy[i];
}

void adam_avx2(std::size_t n, float* p, const float* g, float* m, float* v, float lr,
               float beta1, float beta2, float eps, float bc1, float bc2, float wd) {
  const __m256 vb1 = _mm256_set1_ps(beta1), vb1c = _mm256_set1_ps(1.0f - beta1);
  const __m256 vb2 = _mm256_set1_ps(beta2), vb2c = _mm256_set1_ps(1.0f - beta2);
  const __m256 vlr = _mm256_set1_ps(lr), veps = _mm256_set1_ps(eps);
  const __m256 vbc1 = _mm256_set1_ps(bc1), vbc2 = _mm256_set1_ps(bc2);
  const __m256 vwd = _mm256_set1_ps(wd);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vg = _mm256_loadu_ps(g + i);
    __m256 vm = _mm256_fmadd_ps(vb1c, vg, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
    __m256 vv = _mm256_fmadd_ps(vb2c, _mm256_mul_ps(vg, vg),
                                _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
    _mm256_storeu_ps(m + i, vm);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(vm, vbc1);
    const __m256 vhat = _mm256_mul_ps(vv, vbc2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
    __m256 vp = _mm256_loadu_ps(p + i);
    const __m256 upd = _mm256_fmadd_ps(vwd, vp, _mm256_div_ps(mhat, denom));
    _mm256_storeu_ps(p + i, _mm256_fnmadd_ps(vlr, upd, vp));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    const float mhat = m[i] * bc1;
    const float vhat = v[i] * bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

}  // namespace

void fill_avx2_table(KernelTable& t) {
  t.gemm_nn = gemm_nn_avx2;
  t.gemm_tn = gemm_tn_avx2;
  t.gemm_nt = gemm_nt_avx2;
  t.axpy = axpy_avx2;
  t.relu = relu_avx2;
  t.relu_grad = relu_grad_avx2;
  t.lrelu = lrelu_avx2;
  t.lrelu_grad = lrelu_grad_avx2;
  t.adam = adam_avx2;
}

}  // namespace patx::kernels
