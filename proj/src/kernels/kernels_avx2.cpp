// Compiled with -mavx2 -mfma; only dispatch.cpp decides whether these run.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

#include "genfeat/kernels.hpp"

namespace genfeat::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void v_matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      __m256d va = _mm256_set1_pd(a[i * k + p]);
      const double* bp = b + p * n;
      std::size_t j = 0;
      for (; j < n4; j += 4) {
        __m256d vc = _mm256_loadu_pd(ci + j);
        vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j), vc);
        _mm256_storeu_pd(ci + j, vc);
      }
      double aip = a[i * k + p];
      for (; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void v_matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
  v_matmul_nn_acc(a, b, c, m, k, n);
}

void v_matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      __m256d va = _mm256_set1_pd(ap[i]);
      double* ci = c + i * n;
      std::size_t j = 0;
      for (; j < n4; j += 4) {
        __m256d vc = _mm256_loadu_pd(ci + j);
        vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j), vc);
        _mm256_storeu_pd(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += ap[i] * bp[j];
    }
  }
}

void v_matmul_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t k4 = k & ~std::size_t(3);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      __m256d vacc = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p < k4; p += 4) {
        vacc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), vacc);
      }
      double acc = hsum(vacc);
      for (; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

void v_add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void v_sub(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void v_mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void v_scale(const double* x, double a, double* out, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

double v_dot(const double* x, const double* y, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i < n4; i += 4)
    vacc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), vacc);
  double acc = hsum(vacc);
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double v_sum(const double* x, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i));
  double acc = hsum(vacc);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace

const Backend& avx2_backend() {
  static const Backend b{
      "avx2",     v_matmul_nn, v_matmul_nn_acc, v_matmul_tn_acc, v_matmul_nt_acc,
      v_add,      v_sub,       v_mul,           v_axpy,          v_scale,
      v_dot,      v_sum,
  };
  return b;
}

}  // namespace genfeat::kernels

#endif  // x86_64
