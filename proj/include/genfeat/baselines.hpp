#pragma once

#include <cstdint>
#include <vector>

#include "genfeat/feature_io.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// Principal component analysis fitted on pooled feature rows.
struct PcaModel {
  Tensor mean;                           // [D]
  Tensor axes;                           // [D,k], orthonormal columns
  std::vector<double> explained_ratio;   // k entries, non-increasing, sum <= 1
};

// Fits the top `k` principal axes of `rows` ([n,D], n > k) by
// eigendecomposition of the sample covariance. Throws DataError when the
// centered data has rank below k (the message names the achievable rank).
// Each axis is oriented so its largest-magnitude coordinate is positive.
PcaModel pca_fit(const Tensor& rows, std::size_t k);

// (x - mean) . axes for x of shape [R,D]; returns [R,k].
Tensor pca_project(const PcaModel& model, const Tensor& x);

// Which transformer layers to pool into one per-token vector.
enum class LayerSelection {
  kAll,       // sum of all twelve layers
  kLastFour,  // sum of the last four
  kLastOnly,  // final layer alone
};

// Sums the selected layers of document `doc`; returns [tokens, width]. The
// file must carry exactly twelve layers.
Tensor sum_layer_embeddings(const LayerEmbeddings& le, std::size_t doc, LayerSelection sel);

// First `target` columns of x ([R,W], target <= W); returns [R,target].
Tensor truncate_embedding_dim(const Tensor& x, std::size_t target);

}  // namespace genfeat
