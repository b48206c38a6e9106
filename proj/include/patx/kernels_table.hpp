#pragma once

#include <cstddef>

// Internal: function-pointer table the dispatcher fills from the selected
// backend. Not part of the public API.
namespace patx::kernels {

struct KernelTable {
  void (*gemm_nn)(int, int, int, float, const float*, int, const float*, int, float, float*,
                  int) = nullptr;
  void (*gemm_tn)(int, int, int, float, const float*, int, const float*, int, float, float*,
                  int) = nullptr;
  void (*gemm_nt)(int, int, int, float, const float*, int, const float*, int, float, float*,
                  int) = nullptr;
  void (*axpy)(std::size_t, float, const float*, float*) = nullptr;
  void (*relu)(std::size_t, const float*, float*) = nullptr;
  void (*relu_grad)(std::size_t, const float*, const float*, float*) = nullptr;
  void (*lrelu)(std::size_t, float, const float*, float*) = nullptr;
  void (*lrelu_grad)(std::size_t, float, const float*, const float*, float*) = nullptr;
  void (*adam)(std::size_t, float*, const float*, float*, float*, float, float, float, float,
               float, float, float) = nullptr;
};

void fill_scalar_table(KernelTable& t);
#ifdef PATX_X86
void fill_avx2_table(KernelTable& t);
#endif

}  // namespace patx::kernels
