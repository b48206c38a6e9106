#include "patx/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>

#include "patx/kernels_table.hpp"

namespace patx::kernels {

namespace {

KernelTable g_table;
Backend g_backend = Backend::scalar;
std::once_flag g_init_once;

void install(Backend b) {
  if (b == Backend::avx2) {
#ifdef PATX_X86
    fill_avx2_table(g_table);
#endif
  } else {
    fill_scalar_table(g_table);
  }
  g_backend = b;
}

void init() {
  Backend pick = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
  if (const char* env = std::getenv("PATX_KERNEL_BACKEND")) {
    if (std::strcmp(env, "scalar") == 0) pick = Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) pick = Backend::avx2;
  }
  install(pick);
}

const KernelTable& table() {
  std::call_once(g_init_once, init);
  return g_table;
}

}  // namespace

bool cpu_has_avx2() {
#ifdef PATX_X86
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  table();
  return g_backend;
}

bool set_backend(Backend b) {
  table();
  if (b == Backend::avx2 && !cpu_has_avx2()) return false;
  install(b);
  return true;
}

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

void sgemm_nn(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
              int ldb, float beta, float* c, int ldc) {
  table();
  g_table.gemm_nn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void sgemm_tn(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
              int ldb, float beta, float* c, int ldc) {
  table();
  g_table.gemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void sgemm_nt(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
              int ldb, float beta, float* c, int ldc) {
  table();
  g_table.gemm_nt(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void saxpy(std::size_t n, float a, const float* x, float* y) {
  table();
  g_table.axpy(n, a, x, y);
}

void srelu(std::size_t n, const float* x, float* y) {
  table();
  g_table.relu(n, x, y);
}

void srelu_grad(std::size_t n, const float* x, const float* gy, float* gx) {
  table();
  g_table.relu_grad(n, x, gy, gx);
}

void slrelu(std::size_t n, float slope, const float* x, float* y) {
  table();
  g_table.lrelu(n, slope, x, y);
}

void slrelu_grad(std::size_t n, float slope, const float* x, const float* gy, float* gx) {
  table();
  g_table.lrelu_grad(n, slope, x, gy, gx);
}

void sadam(std::size_t n, float* p, const float* g, float* m, float* v, float lr, float beta1,
           float beta2, float eps, float bc1, float bc2, float weight_decay) {
  table();
  g_table.adam(n, p, g, m, v, lr, beta1, beta2, eps, bc1, bc2, weight_decay);
}

}  // namespace patx::kernels
