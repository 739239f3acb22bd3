#pragma once

#include <cstddef>

// Inner-loop arithmetic kernels. Scalar reference implementations are always
// built; on x86-64 an AVX2+FMA variant of each kernel is built as well and
// selected at startup when the CPU supports it. The function pointers below
// are the only way the rest of the library reaches these loops, so scalar and
// SIMD builds are interchangeable behind one call surface.
//
// Reductions (dot, sum) may reassociate in the SIMD variants and agree with
// the reference only to rounding; elementwise kernels use fused multiply-add
// where profitable and agree to a ulp or two per element. Equivalence between
// the two backends is pinned by tests/test_kernels.cpp.

namespace gridgaf::kern {

extern double (*dot)(const double* a, const double* b, std::size_t n);
extern double (*sum)(const double* x, std::size_t n);
// y += a * x
extern void (*axpy)(double a, const double* x, double* y, std::size_t n);
// out = a .* b
extern void (*hadamard)(const double* a, const double* b, double* out,
                        std::size_t n);
// out += a .* b
extern void (*hadamard_add)(const double* a, const double* b, double* out,
                            std::size_t n);
// x *= a
extern void (*scale)(double a, double* x, std::size_t n);
extern void (*minmax)(const double* x, std::size_t n, double* lo, double* hi);
// v = mu*v + g; w -= lr*v
extern void (*sgd_momentum_update)(double* w, double* v, const double* g,
                                   double lr, double mu, std::size_t n);
// m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;
// w -= lr * (m*bc1) / (sqrt(v*bc2) + eps)   with bc = bias corrections
extern void (*adam_update)(double* w, double* m, double* v, const double* g,
                           double lr, double beta1, double beta2, double eps,
                           double bc1, double bc2, std::size_t n);

const char* active_backend();  // "avx2" or "scalar"
void select_best_backend();
// Force a backend by name; returns false if it is not available. Test hook.
bool select_backend(const char* name);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void hadamard(const double* a, const double* b, double* out, std::size_t n);
void hadamard_add(const double* a, const double* b, double* out,
                  std::size_t n);
void scale(double a, double* x, std::size_t n);
void minmax(const double* x, std::size_t n, double* lo, double* hi);
void sgd_momentum_update(double* w, double* v, const double* g, double lr,
                         double mu, std::size_t n);
void adam_update(double* w, double* m, double* v, const double* g, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2, std::size_t n);
}  // namespace scalar

#if defined(GRIDGAF_HAVE_AVX2)
namespace avx2 {
bool supported();  // runtime cpuid check
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void hadamard(const double* a, const double* b, double* out, std::size_t n);
void hadamard_add(const double* a, const double* b, double* out,
                  std::size_t n);
void scale(double a, double* x, std::size_t n);
void minmax(const double* x, std::size_t n, double* lo, double* hi);
void sgd_momentum_update(double* w, double* v, const double* g, double lr,
                         double mu, std::size_t n);
void adam_update(double* w, double* m, double* v, const double* g, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2, std::size_t n);
}  // namespace avx2
#endif

}  // namespace gridgaf::kern
