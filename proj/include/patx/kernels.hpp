#pragma once

#include <cstddef>
#include <string>
#include <type_traits>

#include "patx/kernels_ref.hpp"

namespace patx::kernels {

enum class Backend { scalar, avx2 };

/// Backend currently driving the single-precision kernels. Chosen once at
/// startup from CPUID (AVX2+FMA), overridable via set_backend() or the
/// PATX_KERNEL_BACKEND=scalar|avx2 environment variable.
Backend active_backend();
bool set_backend(Backend b);  // returns false if unsupported on this CPU
bool cpu_has_avx2();
const char* backend_name(Backend b);

// Dispatched single-precision entry points.
void sgemm_nn(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
              int ldb, float beta, float* c, int ldc);
void sgemm_tn(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
              int ldb, float beta, float* c, int ldc);
void sgemm_nt(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
              int ldb, float beta, float* c, int ldc);
void saxpy(std::size_t n, float a, const float* x, float* y);
void srelu(std::size_t n, const float* x, float* y);
void srelu_grad(std::size_t n, const float* x, const float* gy, float* gx);
void slrelu(std::size_t n, float slope, const float* x, float* y);
void slrelu_grad(std::size_t n, float slope, const float* x, const float* gy, float* gx);
void sadam(std::size_t n, float* p, const float* g, float* m, float* v, float lr, float beta1,
           float beta2, float eps, float bc1, float bc2, float weight_decay);

// Generic entry points used by the templated layers: float routes through the
// runtime backend, every other type uses the scalar reference.
template <typename T>
inline void gemm_nn(int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
                    T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>)
    sgemm_nn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    ref::gemm_nn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
inline void gemm_tn(int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
                    T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>)
    sgemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    ref::gemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
inline void gemm_nt(int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
                    T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>)
    sgemm_nt(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    ref::gemm_nt(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
inline void axpy(std::size_t n, T a, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>)
    saxpy(n, a, x, y);
  else
    ref::axpy(n, a, x, y);
}

template <typename T>
inline void relu(std::size_t n, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>)
    srelu(n, x, y);
  else
    ref::relu(n, x, y);
}

template <typename T>
inline void relu_grad(std::size_t n, const T* x, const T* gy, T* gx) {
  if constexpr (std::is_same_v<T, float>)
    srelu_grad(n, x, gy, gx);
  else
    ref::relu_grad(n, x, gy, gx);
}

template <typename T>
inline void lrelu(std::size_t n, T slope, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>)
    slrelu(n, slope, x, y);
  else
    ref::lrelu(n, slope, x, y);
}

template <typename T>
inline void lrelu_grad(std::size_t n, T slope, const T* x, const T* gy, T* gx) {
  if constexpr (std::is_same_v<T, float>)
    slrelu_grad(n, slope, x, gy, gx);
  else
    ref::lrelu_grad(n, slope, x, gy, gx);
}

template <typename T>
inline void adam(std::size_t n, T* p, const T* g, T* m, T* v, T lr, T beta1, T beta2, T eps,
                 T bc1, T bc2, T weight_decay) {
  if constexpr (std::is_same_v<T, float>)
    sadam(n, p, g, m, v, lr, beta1, beta2, eps, bc1, bc2, weight_decay);
  else
    ref::adam(n, p, g, m, v, lr, beta1, beta2, eps, bc1, bc2, weight_decay);
}

}  // namespace patx::kernels
