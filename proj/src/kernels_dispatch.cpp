#include "ckgen/kernels.hpp"

#include <cstdlib>

namespace ckgen::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(CKGEN_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::string g_backend = "scalar";

void bind_scalar() {
  dot = generic::dot;
  axpy = generic::axpy;
  scale = generic::scale;
  add = generic::add;
  mul = generic::mul;
  gemm_nn = generic::gemm_nn;
  gemm_nt = generic::gemm_nt;
  gemm_tn_acc = generic::gemm_tn_acc;
  g_backend = "scalar";
}

#if defined(CKGEN_HAVE_AVX2)
void bind_avx2() {
  dot = avx2::dot;
  axpy = avx2::axpy;
  scale = avx2::scale;
  add = avx2::add;
  mul = avx2::mul;
  gemm_nn = avx2::gemm_nn;
  gemm_nt = avx2::gemm_nt;
  gemm_tn_acc = avx2::gemm_tn_acc;
  g_backend = "avx2";
}
#endif

int init_from_env() {
  const char* env = std::getenv("CKGEN_SIMD");
  select_backend(env ? env : "auto");
  return 0;
}

}  // namespace

DotFn dot = generic::dot;
AxpyFn axpy = generic::axpy;
ScaleFn scale = generic::scale;
AddFn add = generic::add;
MulFn mul = generic::mul;
GemmFn gemm_nn = generic::gemm_nn;
GemmFn gemm_nt = generic::gemm_nt;
GemmFn gemm_tn_acc = generic::gemm_tn_acc;

const std::string& active_backend() { return g_backend; }

bool select_backend(const std::string& name) {
  if (name == "scalar" || name == "generic") {
    bind_scalar();
    return true;
  }
#if defined(CKGEN_HAVE_AVX2)
  if (name == "avx2") {
    if (!cpu_has_avx2()) return false;
    bind_avx2();
    return true;
  }
#else
  if (name == "avx2") return false;
#endif
  if (name == "auto" || name.empty()) {
#if defined(CKGEN_HAVE_AVX2)
    if (cpu_has_avx2()) {
      bind_avx2();
      return true;
    }
#endif
    bind_scalar();
    return true;
  }
  return false;
}

namespace {
const int g_kernel_init = init_from_env();
}

}  // namespace ckgen::kernels
