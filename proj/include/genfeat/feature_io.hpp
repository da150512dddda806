#pragma once

#include <string>
#include <vector>

#include "genfeat/tensor.hpp"

namespace genfeat {

// Extracted features ("FEAT"): magic, u32 document count, u32 rows, u32
// cols, then per document rows*cols 32-bit floats row-major. Document ids
// live in a JSONL sidecar at <path>.ids.jsonl, one {"index", "id"} per line.
struct FeatureSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::string> ids;
  std::vector<Tensor> features;  // each [rows, cols]
};

void features_save(const FeatureSet& fs, const std::string& path);
FeatureSet features_load(const std::string& path);

// Precomputed per-token transformer activations ("LYR1"): magic, u32 docs,
// u32 tokens per doc, u32 layer count, u32 width, then floats ordered
// doc, token, layer, width.
struct LayerEmbeddings {
  std::size_t docs = 0;
  std::size_t tokens = 0;
  std::size_t layers = 0;
  std::size_t width = 0;
  std::vector<std::string> ids;  // optional sidecar, may be empty
  std::vector<real> data;

  real at(std::size_t d, std::size_t t, std::size_t l, std::size_t w) const {
    return data[((d * tokens + t) * layers + l) * width + w];
  }
  real& at(std::size_t d, std::size_t t, std::size_t l, std::size_t w) {
    return data[((d * tokens + t) * layers + l) * width + w];
  }
};

void layer_embeddings_save(const LayerEmbeddings& le, const std::string& path);
LayerEmbeddings layer_embeddings_load(const std::string& path);

}  // namespace genfeat
