#pragma once

#include <cmath>
#include <cstddef>

// Scalar reference kernels. These are the ground truth the SIMD variants are
// equivalence-tested against, and the only path for double precision (the
// gradient-check tests run in double).
namespace patx::kernels::ref {

// C = alpha * A(MxK) * B(KxN) + beta * C.  Row-major, ld* are row strides.
template <typename T>
void gemm_nn(int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb, T beta,
             T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int p = 0; p < k; ++p) {
      const T av = alpha * a[static_cast<std::size_t>(i) * lda + p];
      const T* brow = b + static_cast<std::size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C = alpha * A^T * B + beta * C with A stored KxM: C[i,j] = sum_p A[p,i]*B[p,j].
template <typename T>
void gemm_tn(int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb, T beta,
             T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
  }
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * lda;
    const T* brow = b + static_cast<std::size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const T av = alpha * arow[i];
      T* crow = c + static_cast<std::size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C = alpha * A * B^T + beta * C with B stored NxK: C[i,j] = sum_p A[i,p]*B[j,p].
template <typename T>
void gemm_nt(int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb, T beta,
             T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * lda;
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * ldb;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = alpha * acc + (beta == T(0) ? T(0) : beta * crow[j]);
    }
  }
}

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale(std::size_t n, T a, T* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
void relu(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// gx += gy * 1[x > 0]
template <typename T>
void relu_grad(std::size_t n, const T* x, const T* gy, T* gx) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > T(0) ? gy[i] : T(0);
}

template <typename T>
void lrelu(std::size_t n, T slope, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void lrelu_grad(std::size_t n, T slope, const T* x, const T* gy, T* gx) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > T(0) ? gy[i] : slope * gy[i];
}

// Decoupled Adam step. bc1/bc2 are the 1/(1-beta^t) bias corrections so the
// caller owns the step counter.
template <typename T>
void adam(std::size_t n, T* p, const T* g, T* m, T* v, T lr, T beta1, T beta2, T eps, T bc1,
          T bc2, T weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] * bc1;
    const T vhat = v[i] * bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[i]);
  }
}

}  // namespace patx::kernels::ref
