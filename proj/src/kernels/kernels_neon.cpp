// AArch64 NEON variants (float64x2). Mirrors the scalar loop order.
#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstddef>

#include "genfeat/kernels.hpp"

namespace genfeat::kernels {
namespace {

void v_matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      float64x2_t va = vdupq_n_f64(a[i * k + p]);
      const double* bp = b + p * n;
      std::size_t j = 0;
      for (; j < n2; j += 2) {
        float64x2_t vc = vld1q_f64(ci + j);
        vc = vfmaq_f64(vc, va, vld1q_f64(bp + j));
        vst1q_f64(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += a[i * k + p] * bp[j];
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
  std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      float64x2_t va = vdupq_n_f64(ap[i]);
      double* ci = c + i * n;
      std::size_t j = 0;
      for (; j < n2; j += 2) {
        float64x2_t vc = vld1q_f64(ci + j);
        vc = vfmaq_f64(vc, va, vld1q_f64(bp + j));
        vst1q_f64(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += ap[i] * bp[j];
    }
  }
}

void v_matmul_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t k2 = k & ~std::size_t(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      float64x2_t vacc = vdupq_n_f64(0.0);
      std::size_t p = 0;
      for (; p < k2; p += 2) vacc = vfmaq_f64(vacc, vld1q_f64(ai + p), vld1q_f64(bj + p));
      double acc = vaddvq_f64(vacc);
      for (; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

void v_add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t n2 = n & ~std::size_t(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void v_sub(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t n2 = n & ~std::size_t(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void v_mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t n2 = n & ~std::size_t(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
  float64x2_t va = vdupq_n_f64(a);
  std::size_t n2 = n & ~std::size_t(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vfmaq_f64(vy, va, vld1q_f64(x + i));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void v_scale(const double* x, double a, double* out, std::size_t n) {
  float64x2_t va = vdupq_n_f64(a);
  std::size_t n2 = n & ~std::size_t(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

double v_dot(const double* x, const double* y, std::size_t n) {
  float64x2_t vacc = vdupq_n_f64(0.0);
  std::size_t n2 = n & ~std::size_t(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vacc = vfmaq_f64(vacc, vld1q_f64(x + i), vld1q_f64(y + i));
  double acc = vaddvq_f64(vacc);
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double v_sum(const double* x, std::size_t n) {
  float64x2_t vacc = vdupq_n_f64(0.0);
  std::size_t n2 = n & ~std::size_t(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vacc = vaddq_f64(vacc, vld1q_f64(x + i));
  double acc = vaddvq_f64(vacc);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace

const Backend& neon_backend() {
  static const Backend b{
      "neon",     v_matmul_nn, v_matmul_nn_acc, v_matmul_tn_acc, v_matmul_nt_acc,
      v_add,      v_sub,       v_mul,           v_axpy,          v_scale,
      v_dot,      v_sum,
  };
  return b;
}

}  // namespace genfeat::kernels

#endif  // __aarch64__
