#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "genfeat/baselines.hpp"
#include "genfeat/errors.hpp"
#include "genfeat/preprocess.hpp"
#include "genfeat/rng.hpp"
#include "helpers.hpp"

using namespace genfeat;

namespace {

Tensor random_rows(Rng& rng, std::size_t n, std::size_t d) {
  Tensor t({n, d});
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

// Covariance-vector product straight from the raw data, bypassing the model.
std::vector<double> cov_times(const Tensor& rows, const std::vector<double>& v) {
  const std::size_t n = rows.shape()[0];
  const std::size_t d = rows.shape()[1];
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows.data()[r * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += (rows.data()[r * d + j] - mean[j]) * v[j];
    for (std::size_t j = 0; j < d; ++j) out[j] += dot * (rows.data()[r * d + j] - mean[j]);
  }
  for (double& x : out) x /= static_cast<double>(n - 1);
  return out;
}

double total_variance(const Tensor& rows) {
  const std::size_t n = rows.shape()[0];
  const std::size_t d = rows.shape()[1];
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows.data()[r * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = rows.data()[r * d + j] - mean[j];
      total += c * c;
    }
  return total / static_cast<double>(n - 1);
}

}  // namespace

TEST_CASE("pca on collinear points recovers the line") {
  // Points on y = 2x: single direction of variance, axis (1,2)/sqrt(5).
  Tensor rows({4, 2}, {1, 2, 2, 4, 3, 6, 4, 8});
  PcaModel m = pca_fit(rows, 1);

  CHECK(m.mean.data()[0] == doctest::Approx(2.5));
  CHECK(m.mean.data()[1] == doctest::Approx(5.0));
  const double s5 = std::sqrt(5.0);
  CHECK(m.axes.data()[0] == doctest::Approx(1.0 / s5));
  CHECK(m.axes.data()[1] == doctest::Approx(2.0 / s5));
  REQUIRE(m.explained_ratio.size() == 1);
  CHECK(m.explained_ratio[0] == doctest::Approx(1.0));

  // Projection of (1,2): (1-2.5, 2-5).(1,2)/sqrt(5) = -7.5/sqrt(5).
  Tensor p = pca_project(m, Tensor({1, 2}, {1, 2}));
  CHECK(p.data()[0] == doctest::Approx(-7.5 / s5));

  // The second component does not exist in this data.
  CHECK_THROWS_WITH_AS(pca_fit(rows, 2), doctest::Contains("only 1"), DataError);
}

TEST_CASE("pca axes are orthonormal eigenvectors with honest variance ratios") {
  Rng rng(31);
  Tensor rows = random_rows(rng, 40, 7);
  const std::size_t k = 5;
  PcaModel m = pca_fit(rows, k);

  // Orthonormal columns.
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < 7; ++i)
        dot += m.axes.data()[i * k + a] * m.axes.data()[i * k + b];
      CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) < 1e-9);
    }

  // Each axis satisfies the eigenvalue equation C v = lambda v computed
  // directly from the raw rows, with lambda = ratio * total variance.
  const double total = total_variance(rows);
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> v(7);
    for (std::size_t i = 0; i < 7; ++i) v[i] = m.axes.data()[i * k + a];
    std::vector<double> cv = cov_times(rows, v);
    const double lambda = m.explained_ratio[a] * total;
    for (std::size_t i = 0; i < 7; ++i) CHECK(std::fabs(cv[i] - lambda * v[i]) < 1e-8);
  }

  // Ratios are non-increasing and sum to at most one.
  double sum = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    if (a > 0) CHECK(m.explained_ratio[a] <= m.explained_ratio[a - 1] + 1e-12);
    sum += m.explained_ratio[a];
  }
  CHECK(sum <= 1.0 + 1e-12);

  // Sign convention: the largest-magnitude coordinate of each axis is positive.
  for (std::size_t a = 0; a < k; ++a) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 7; ++i)
      if (std::fabs(m.axes.data()[i * k + a]) > std::fabs(m.axes.data()[arg * k + a])) arg = i;
    CHECK(m.axes.data()[arg * k + a] > 0.0);
  }

  // The first axis beats random unit directions at capturing variance.
  std::vector<double> v0(7);
  for (std::size_t i = 0; i < 7; ++i) v0[i] = m.axes.data()[i * k + 0];
  std::vector<double> cv0 = cov_times(rows, v0);
  double best = 0.0;
  for (std::size_t i = 0; i < 7; ++i) best += v0[i] * cv0[i];
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> u(7);
    double norm = 0.0;
    for (double& x : u) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : u) x /= norm;
    std::vector<double> cu = cov_times(rows, u);
    double var = 0.0;
    for (std::size_t i = 0; i < 7; ++i) var += u[i] * cu[i];
    CHECK(var <= best + 1e-9);
  }
}

TEST_CASE("full-rank pca round trip reconstructs the data") {
  Rng rng(12);
  Tensor rows = random_rows(rng, 30, 6);
  PcaModel m = pca_fit(rows, 6);
  Tensor proj = pca_project(m, rows);

  // x = mean + proj . axes^T when every component is kept.
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t j = 0; j < 6; ++j) {
      double rec = m.mean.data()[j];
      for (std::size_t a = 0; a < 6; ++a)
        rec += proj.data()[r * 6 + a] * m.axes.data()[j * 6 + a];
      CHECK(std::fabs(rec - rows.data()[r * 6 + j]) < 1e-8);
    }

  double sum = 0.0;
  for (double x : m.explained_ratio) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pca projection is row-wise and validates input") {
  Rng rng(44);
  Tensor rows = random_rows(rng, 25, 5);
  PcaModel m = pca_fit(rows, 3);

  Tensor batch = random_rows(rng, 8, 5);
  Tensor all = pca_project(m, batch);
  CHECK(all.shape() == std::vector<std::size_t>{8, 3});
  for (std::size_t r = 0; r < 8; ++r) {
    Tensor one({1, 5}, std::vector<real>(batch.data() + r * 5, batch.data() + (r + 1) * 5));
    Tensor p = pca_project(m, one);
    for (std::size_t a = 0; a < 3; ++a)
      CHECK(p.data()[a] == doctest::Approx(all.data()[r * 3 + a]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(pca_project(m, Tensor({2, 6})), DataError);
  CHECK_THROWS_AS(pca_fit(rows, 0), DataError);
  CHECK_THROWS_AS(pca_fit(rows, 6), DataError);          // k > width
  CHECK_THROWS_AS(pca_fit(random_rows(rng, 3, 5), 3), DataError);  // n <= k
}

TEST_CASE("rank-deficient pca names the achievable rank") {
  // 12 points spanning a 2-D subspace of R^5.
  Rng rng(3);
  Tensor rows({12, 5});
  for (std::size_t r = 0; r < 12; ++r) {
    const double a = rng.normal(), b = rng.normal();
    const double dirs[2][5] = {{1, 0, 1, 0, 1}, {0, 1, 0, 1, 0}};
    for (std::size_t j = 0; j < 5; ++j)
      rows.data()[r * 5 + j] = a * dirs[0][j] + b * dirs[1][j];
  }
  CHECK_THROWS_WITH_AS(pca_fit(rows, 3), doctest::Contains("only 2"), DataError);
  PcaModel ok = pca_fit(rows, 2);
  CHECK(ok.explained_ratio[0] + ok.explained_ratio[1] == doctest::Approx(1.0));
}

TEST_CASE("layer sums select the right transformer layers") {
  LayerEmbeddings le;
  le.docs = 2;
  le.tokens = 3;
  le.layers = 12;
  le.width = 4;
  le.data.resize(le.docs * le.tokens * le.layers * le.width);
  // Value l+1 at every (d,t,l,w) cell, plus a doc/token/width marker.
  for (std::size_t d = 0; d < le.docs; ++d)
    for (std::size_t t = 0; t < le.tokens; ++t)
      for (std::size_t l = 0; l < le.layers; ++l)
        for (std::size_t w = 0; w < le.width; ++w)
          le.at(d, t, l, w) = static_cast<double>(l + 1) +
                              0.001 * static_cast<double>(d * 100 + t * 10 + w);

  // Sum of 1..12 = 78; last four 9+10+11+12 = 42; last layer alone 12. The
  // marker term scales by the number of layers summed.
  Tensor all = sum_layer_embeddings(le, 1, LayerSelection::kAll);
  Tensor last4 = sum_layer_embeddings(le, 1, LayerSelection::kLastFour);
  Tensor last = sum_layer_embeddings(le, 1, LayerSelection::kLastOnly);
  CHECK(all.shape() == std::vector<std::size_t>{3, 4});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t w = 0; w < 4; ++w) {
      const double marker = 0.001 * static_cast<double>(100 + t * 10 + w);
      CHECK(all.data()[t * 4 + w] == doctest::Approx(78.0 + 12 * marker).epsilon(1e-12));
      CHECK(last4.data()[t * 4 + w] == doctest::Approx(42.0 + 4 * marker).epsilon(1e-12));
      CHECK(last.data()[t * 4 + w] == doctest::Approx(12.0 + marker).epsilon(1e-12));
    }

  // All twelve = last four + first eight, recomputed from raw data.
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t w = 0; w < 4; ++w) {
      double first8 = 0.0;
      for (std::size_t l = 0; l < 8; ++l) first8 += le.at(1, t, l, w);
      CHECK(std::fabs(all.data()[t * 4 + w] - last4.data()[t * 4 + w] - first8) < 1e-12);
    }

  CHECK_THROWS_AS(sum_layer_embeddings(le, 2, LayerSelection::kAll), DataError);
  le.layers = 6;
  le.data.resize(le.docs * le.tokens * le.layers * le.width);
  CHECK_THROWS_AS(sum_layer_embeddings(le, 0, LayerSelection::kAll), DataError);
}

TEST_CASE("embedding truncation keeps leading columns and composes") {
  Tensor x({2, 5}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  Tensor t3 = truncate_embedding_dim(x, 3);
  CHECK(t3.shape() == std::vector<std::size_t>{2, 3});
  CHECK(t3.data()[0] == 1);
  CHECK(t3.data()[2] == 3);
  CHECK(t3.data()[3] == 6);
  CHECK(t3.data()[5] == 8);

  // Truncating in two hops equals one hop.
  Tensor two_hop = truncate_embedding_dim(truncate_embedding_dim(x, 4), 2);
  Tensor one_hop = truncate_embedding_dim(x, 2);
  for (std::size_t i = 0; i < one_hop.numel(); ++i)
    CHECK(two_hop.data()[i] == one_hop.data()[i]);

  // Full width is the identity.
  Tensor same = truncate_embedding_dim(x, 5);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(same.data()[i] == x.data()[i]);

  CHECK_THROWS_AS(truncate_embedding_dim(x, 6), DataError);
  CHECK_THROWS_AS(truncate_embedding_dim(x, 0), DataError);
}

TEST_CASE("embedding table is seeded, bounded and silent on padding") {
  Tensor t = make_embedding_table(10, 8, 42);
  CHECK(t.shape() == std::vector<std::size_t>{10, 8});
  for (std::size_t c = 0; c < 8; ++c) CHECK(t.data()[c] == 0.0);

  bool any_nonzero = false;
  for (std::size_t i = 8; i < t.numel(); ++i) {
    CHECK(t.data()[i] > -0.05);
    CHECK(t.data()[i] < 0.05);
    if (t.data()[i] != 0.0) any_nonzero = true;
  }
  CHECK(any_nonzero);

  Tensor again = make_embedding_table(10, 8, 42);
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(again.data()[i] == t.data()[i]);
  Tensor other = make_embedding_table(10, 8, 43);
  bool differs = false;
  for (std::size_t i = 0; i < t.numel(); ++i)
    if (other.data()[i] != t.data()[i]) differs = true;
  CHECK(differs);

  CHECK_THROWS_AS(make_embedding_table(1, 8, 1), DataError);
  CHECK_THROWS_AS(make_embedding_table(10, 0, 1), DataError);
}
