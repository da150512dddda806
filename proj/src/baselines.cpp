#include "genfeat/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "genfeat/errors.hpp"
#include "genfeat/kernels.hpp"

namespace genfeat {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix held row-major in
// `a` (destroyed). Eigenvectors come back as columns of `v`.
void jacobi_eigen(std::vector<double>& a, std::size_t d, std::vector<double>& eigvals,
                  std::vector<double>& v) {
  v.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  double norm = 0.0;
  for (double x : a) norm += x * x;
  norm = std::sqrt(norm);
  const double stop = (norm > 0 ? norm : 1.0) * 1e-14;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    if (std::sqrt(2.0 * off) < stop) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::fabs(apq) < stop / static_cast<double>(d * d)) continue;
        const double app = a[p * d + p];
        const double aqq = a[q * d + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < d; ++i) {
          const double aip = a[i * d + p];
          const double aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double api = a[p * d + i];
          const double aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double vip = v[i * d + p];
          const double viq = v[i * d + q];
          v[i * d + p] = c * vip - s * viq;
          v[i * d + q] = s * vip + c * viq;
        }
      }
    }
  }
  eigvals.resize(d);
  for (std::size_t i = 0; i < d; ++i) eigvals[i] = a[i * d + i];
}

constexpr std::size_t kTransformerLayers = 12;

}  // namespace

PcaModel pca_fit(const Tensor& rows, std::size_t k) {
  if (rows.rank() != 2) throw DataError("pca_fit: rows must be a rank-2 matrix");
  const std::size_t n = rows.shape()[0];
  const std::size_t d = rows.shape()[1];
  if (k == 0) throw DataError("pca_fit: need at least one component");
  if (k > d)
    throw DataError("pca_fit: " + std::to_string(k) + " components exceed feature width " +
                    std::to_string(d));
  if (n <= k)
    throw DataError("pca_fit: need more rows than components, got " + std::to_string(n) +
                    " rows for " + std::to_string(k));

  PcaModel m;
  m.mean = Tensor({d});
  for (std::size_t r = 0; r < n; ++r)
    kernels::active().add(m.mean.data(), rows.data() + r * d, m.mean.data(), d);
  kernels::active().scale(m.mean.data(), 1.0 / static_cast<double>(n), m.mean.data(), d);

  Tensor centered({n, d});
  for (std::size_t r = 0; r < n; ++r)
    kernels::active().sub(rows.data() + r * d, m.mean.data(), centered.data() + r * d, d);

  // Sample covariance C = B^T B / (n-1).
  std::vector<double> cov(d * d, 0.0);
  kernels::active().matmul_tn_acc(centered.data(), centered.data(), cov.data(), d, n, d);
  for (double& x : cov) x /= static_cast<double>(n - 1);

  std::vector<double> eigvals, v;
  jacobi_eigen(cov, d, eigvals, v);

  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return eigvals[a] > eigvals[b]; });

  const double lead = std::max(eigvals[idx[0]], 0.0);
  std::size_t rank = 0;
  for (std::size_t i = 0; i < d; ++i)
    if (eigvals[idx[i]] > lead * 1e-10 && eigvals[idx[i]] > 0.0) ++rank;
  if (rank < k)
    throw DataError("pca_fit: data supports only " + std::to_string(rank) +
                    " components, requested " + std::to_string(k));

  m.axes = Tensor({d, k});
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = idx[j];
    // Orient each axis so its largest-magnitude coordinate is positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::fabs(v[i * d + src]) > std::fabs(v[arg * d + src])) arg = i;
    const double flip = v[arg * d + src] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) m.axes.data()[i * k + j] = flip * v[i * d + src];
  }

  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) total += std::max(eigvals[i], 0.0);
  m.explained_ratio.resize(k);
  for (std::size_t j = 0; j < k; ++j)
    m.explained_ratio[j] = total > 0.0 ? std::max(eigvals[idx[j]], 0.0) / total : 0.0;
  return m;
}

Tensor pca_project(const PcaModel& model, const Tensor& x) {
  if (x.rank() != 2) throw DataError("pca_project: input must be a rank-2 matrix");
  const std::size_t d = model.mean.numel();
  const std::size_t k = model.axes.shape()[1];
  if (x.shape()[1] != d)
    throw DataError("pca_project: input width " + std::to_string(x.shape()[1]) +
                    " != fitted width " + std::to_string(d));
  const std::size_t r = x.shape()[0];
  Tensor centered({r, d});
  for (std::size_t i = 0; i < r; ++i)
    kernels::active().sub(x.data() + i * d, model.mean.data(), centered.data() + i * d, d);
  Tensor out({r, k});
  kernels::active().matmul_nn(centered.data(), model.axes.data(), out.data(), r, d, k);
  return out;
}

Tensor sum_layer_embeddings(const LayerEmbeddings& le, std::size_t doc, LayerSelection sel) {
  if (le.layers != kTransformerLayers)
    throw DataError("sum_layer_embeddings: expected " + std::to_string(kTransformerLayers) +
                    " layers, file has " + std::to_string(le.layers));
  if (doc >= le.docs)
    throw DataError("sum_layer_embeddings: document " + std::to_string(doc) +
                    " out of range (file has " + std::to_string(le.docs) + ")");
  std::size_t first = 0;
  switch (sel) {
    case LayerSelection::kAll: first = 0; break;
    case LayerSelection::kLastFour: first = kTransformerLayers - 4; break;
    case LayerSelection::kLastOnly: first = kTransformerLayers - 1; break;
  }
  Tensor out({le.tokens, le.width});
  for (std::size_t t = 0; t < le.tokens; ++t)
    for (std::size_t l = first; l < kTransformerLayers; ++l)
      for (std::size_t w = 0; w < le.width; ++w)
        out.data()[t * le.width + w] += le.at(doc, t, l, w);
  return out;
}

Tensor truncate_embedding_dim(const Tensor& x, std::size_t target) {
  if (x.rank() != 2) throw DataError("truncate_embedding_dim: input must be rank 2");
  const std::size_t r = x.shape()[0];
  const std::size_t w = x.shape()[1];
  if (target == 0) throw DataError("truncate_embedding_dim: target width must be positive");
  if (target > w)
    throw DataError("truncate_embedding_dim: target " + std::to_string(target) +
                    " exceeds width " + std::to_string(w));
  Tensor out({r, target});
  for (std::size_t i = 0; i < r; ++i)
    std::copy(x.data() + i * w, x.data() + i * w + target, out.data() + i * target);
  return out;
}

}  // namespace genfeat
