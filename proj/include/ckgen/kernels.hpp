#pragma once

// Dense double-precision kernels behind the tensor math. Each kernel has a
// scalar reference implementation (kernels::generic) and, on x86-64 with
// AVX2+FMA, a vectorized variant (kernels::avx2). The exported function
// pointers are bound once at startup based on runtime CPU detection; the
// CKGEN_SIMD environment variable ("scalar" | "avx2" | "auto") overrides
// the choice, which the equivalence tests rely on.

#include <cstddef>
#include <string>

namespace ckgen::kernels {

using DotFn = double (*)(const double*, const double*, std::size_t);
using AxpyFn = void (*)(double, const double*, double*, std::size_t);
using ScaleFn = void (*)(double*, double, std::size_t);
using AddFn = void (*)(const double*, const double*, double*, std::size_t);
using MulFn = void (*)(const double*, const double*, double*, std::size_t);
// gemm_nn:     C (m x n)  = A (m x k) * B (k x n)
// gemm_nt:     C (m x n)  = A (m x k) * B^T, B stored (n x k)
// gemm_tn_acc: C (m x n) += A^T * B,   A stored (k x m), B stored (k x n)
// All matrices row-major and non-aliasing.
using GemmFn = void (*)(const double*, const double*, double*,
                        std::size_t, std::size_t, std::size_t);

namespace generic {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn_acc(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n);
}  // namespace generic

#if defined(CKGEN_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn_acc(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n);
}  // namespace avx2
#endif

// Bound at startup; see kernels_dispatch.cpp.
extern DotFn dot;
extern AxpyFn axpy;
extern ScaleFn scale;
extern AddFn add;
extern MulFn mul;
extern GemmFn gemm_nn;
extern GemmFn gemm_nt;
extern GemmFn gemm_tn_acc;

// Name of the active backend ("scalar" or "avx2").
const std::string& active_backend();

// Rebind the kernel table. Accepts "scalar", "avx2", "auto"; returns false
// (and leaves the table unchanged) if the request cannot be satisfied.
bool select_backend(const std::string& name);

}  // namespace ckgen::kernels
