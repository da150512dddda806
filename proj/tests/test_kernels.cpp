#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "genfeat/kernels.hpp"
#include "genfeat/rng.hpp"

using namespace genfeat;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

// Every SIMD backend must agree with the scalar reference within summation
// reordering noise.
void check_backend(const kernels::Backend& b, const kernels::Backend& ref, std::uint64_t seed) {
  Rng rng(seed);
  const double tol = 1e-12;
  for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{
           {1, 1, 1}, {2, 3, 4}, {5, 7, 3}, {8, 8, 8}, {13, 31, 17}, {64, 50, 33}}) {
    auto a = random_vec(rng, m * k);
    auto bt = random_vec(rng, k * n);
    std::vector<double> c1(m * n), c2(m * n);
    b.matmul_nn(a.data(), bt.data(), c1.data(), m, k, n);
    ref.matmul_nn(a.data(), bt.data(), c2.data(), m, k, n);
    for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(tol));

    auto seedc = random_vec(rng, m * n);
    c1 = seedc;
    c2 = seedc;
    b.matmul_nn_acc(a.data(), bt.data(), c1.data(), m, k, n);
    ref.matmul_nn_acc(a.data(), bt.data(), c2.data(), m, k, n);
    for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(tol));

    auto at = random_vec(rng, k * m);  // [k,m] for the transposed-left product
    c1 = seedc;
    c2 = seedc;
    b.matmul_tn_acc(at.data(), bt.data(), c1.data(), m, k, n);
    ref.matmul_tn_acc(at.data(), bt.data(), c2.data(), m, k, n);
    for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(tol));

    auto bn = random_vec(rng, n * k);  // [n,k] for the transposed-right product
    c1 = seedc;
    c2 = seedc;
    b.matmul_nt_acc(a.data(), bn.data(), c1.data(), m, k, n);
    ref.matmul_nt_acc(a.data(), bn.data(), c2.data(), m, k, n);
    for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(tol));
  }

  for (std::size_t len : {1u, 2u, 3u, 4u, 5u, 17u, 256u, 1001u}) {
    auto x = random_vec(rng, len);
    auto y = random_vec(rng, len);
    std::vector<double> o1(len), o2(len);
    b.add(x.data(), y.data(), o1.data(), len);
    ref.add(x.data(), y.data(), o2.data(), len);
    CHECK(o1 == o2);
    b.sub(x.data(), y.data(), o1.data(), len);
    ref.sub(x.data(), y.data(), o2.data(), len);
    CHECK(o1 == o2);
    b.mul(x.data(), y.data(), o1.data(), len);
    ref.mul(x.data(), y.data(), o2.data(), len);
    CHECK(o1 == o2);
    b.scale(x.data(), 1.7, o1.data(), len);
    ref.scale(x.data(), 1.7, o2.data(), len);
    CHECK(o1 == o2);
    o1 = y;
    o2 = y;
    b.axpy(-0.3, x.data(), o1.data(), len);
    ref.axpy(-0.3, x.data(), o2.data(), len);
    for (std::size_t i = 0; i < len; ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(tol));
    CHECK(b.dot(x.data(), y.data(), len) ==
          doctest::Approx(ref.dot(x.data(), y.data(), len)).epsilon(tol));
    CHECK(b.sum(x.data(), len) == doctest::Approx(ref.sum(x.data(), len)).epsilon(tol));
  }
}

}  // namespace

TEST_CASE("scalar kernels: hand-checked products") {
  const auto& b = kernels::scalar_backend();
  // [[1,2],[3,4]] x [[5,6],[7,8]] = [[19,22],[43,50]]
  double a[] = {1, 2, 3, 4};
  double bm[] = {5, 6, 7, 8};
  double c[4];
  b.matmul_nn(a, bm, c, 2, 2, 2);
  CHECK(c[0] == 19);
  CHECK(c[1] == 22);
  CHECK(c[2] == 43);
  CHECK(c[3] == 50);

  // A^T B with A=[[1,2],[3,4]] stored as [k=2,m=2]: A^T=[[1,3],[2,4]]
  double ct[4] = {0, 0, 0, 0};
  b.matmul_tn_acc(a, bm, ct, 2, 2, 2);
  CHECK(ct[0] == 1 * 5 + 3 * 7);
  CHECK(ct[1] == 1 * 6 + 3 * 8);
  CHECK(ct[2] == 2 * 5 + 4 * 7);
  CHECK(ct[3] == 2 * 6 + 4 * 8);

  // A B^T with B=[[5,6],[7,8]] stored as [n=2,k=2]
  double cn[4] = {0, 0, 0, 0};
  b.matmul_nt_acc(a, bm, cn, 2, 2, 2);
  CHECK(cn[0] == 1 * 5 + 2 * 6);
  CHECK(cn[1] == 1 * 7 + 2 * 8);
  CHECK(cn[2] == 3 * 5 + 4 * 6);
  CHECK(cn[3] == 3 * 7 + 4 * 8);

  CHECK(b.dot(a, bm, 4) == 1 * 5 + 2 * 6 + 3 * 7 + 4 * 8);
  CHECK(b.sum(a, 4) == 10);
}

TEST_CASE("simd kernels match the scalar reference") {
  bool any = false;
  if (kernels::avx2_available()) {
    kernels::select(kernels::BackendKind::Avx2);
    check_backend(kernels::active(), kernels::scalar_backend(), 1234);
    any = true;
  }
  if (kernels::neon_available()) {
    kernels::select(kernels::BackendKind::Neon);
    check_backend(kernels::active(), kernels::scalar_backend(), 5678);
    any = true;
  }
  kernels::select(kernels::BackendKind::Auto);
  if (!any) {
    MESSAGE("no SIMD backend on this machine; scalar reference only");
    check_backend(kernels::scalar_backend(), kernels::scalar_backend(), 42);
  }
}

TEST_CASE("backend selection is explicit and reversible") {
  kernels::select(kernels::BackendKind::Scalar);
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::select(kernels::BackendKind::Auto);
  CHECK(kernels::active().name != nullptr);
}
