#include "gridgaf/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace gridgaf::kern {

double (*dot)(const double*, const double*, std::size_t) = scalar::dot;
double (*sum)(const double*, std::size_t) = scalar::sum;
void (*axpy)(double, const double*, double*, std::size_t) = scalar::axpy;
void (*hadamard)(const double*, const double*, double*, std::size_t) =
    scalar::hadamard;
void (*hadamard_add)(const double*, const double*, double*, std::size_t) =
    scalar::hadamard_add;
void (*scale)(double, double*, std::size_t) = scalar::scale;
void (*minmax)(const double*, std::size_t, double*, double*) = scalar::minmax;
void (*sgd_momentum_update)(double*, double*, const double*, double, double,
                            std::size_t) = scalar::sgd_momentum_update;
void (*adam_update)(double*, double*, double*, const double*, double, double,
                    double, double, double, double, std::size_t) =
    scalar::adam_update;

namespace {
const char* g_backend = "scalar";

void bind_scalar() {
  dot = scalar::dot;
  sum = scalar::sum;
  axpy = scalar::axpy;
  hadamard = scalar::hadamard;
  hadamard_add = scalar::hadamard_add;
  scale = scalar::scale;
  minmax = scalar::minmax;
  sgd_momentum_update = scalar::sgd_momentum_update;
  adam_update = scalar::adam_update;
  g_backend = "scalar";
}

#if defined(GRIDGAF_HAVE_AVX2)
void bind_avx2() {
  dot = avx2::dot;
  sum = avx2::sum;
  axpy = avx2::axpy;
  hadamard = avx2::hadamard;
  hadamard_add = avx2::hadamard_add;
  scale = avx2::scale;
  minmax = avx2::minmax;
  sgd_momentum_update = avx2::sgd_momentum_update;
  adam_update = avx2::adam_update;
  g_backend = "avx2";
}
#endif

struct AutoSelect {
  AutoSelect() { select_best_backend(); }
} g_auto_select;

}  // namespace

const char* active_backend() { return g_backend; }

void select_best_backend() {
  // GRIDGAF_BACKEND=scalar forces the reference kernels
  if (const char* forced = std::getenv("GRIDGAF_BACKEND")) {
    if (select_backend(forced)) return;
  }
#if defined(GRIDGAF_HAVE_AVX2)
  if (avx2::supported()) {
    bind_avx2();
    return;
  }
#endif
  bind_scalar();
}

bool select_backend(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    bind_scalar();
    return true;
  }
#if defined(GRIDGAF_HAVE_AVX2)
  if (std::strcmp(name, "avx2") == 0 && avx2::supported()) {
    bind_avx2();
    return true;
  }
#endif
  return false;
}

}  // namespace gridgaf::kern
