#pragma once

#include <cstddef>

namespace genfeat::kernels {

// Hot inner loops behind function pointers so a SIMD variant can be picked at
// process start. All matrices are dense row-major doubles.
//
//   matmul_nn      C  = A[m,k]  * B[k,n]
//   matmul_nn_acc  C += A[m,k]  * B[k,n]
//   matmul_tn_acc  C += A[k,m]^T * B[k,n]
//   matmul_nt_acc  C += A[m,k]  * B[n,k]^T
struct Backend {
  const char* name;
  void (*matmul_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n);
  void (*matmul_nn_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                        std::size_t n);
  void (*matmul_tn_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                        std::size_t n);
  void (*matmul_nt_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                        std::size_t n);
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*sub)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  void (*scale)(const double* x, double a, double* out, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
};

enum class BackendKind { Auto, Scalar, Avx2, Neon };

// Active backend; resolves Auto on first use (GENFEAT_KERNELS=scalar|avx2|neon
// overrides the automatic pick).
const Backend& active();

// Force a backend, mainly for equivalence tests. Throws NumericError if the
// requested backend is not available on this machine.
void select(BackendKind kind);

const Backend& scalar_backend();
bool avx2_available();
bool neon_available();

}  // namespace genfeat::kernels
