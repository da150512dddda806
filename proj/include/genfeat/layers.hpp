#pragma once

#include <string>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/optim.hpp"
#include "genfeat/rng.hpp"

namespace genfeat {

enum class Activation { Linear, Sigmoid, Tanh, Elu, LeakyRelu, Softmax };

enum class InitKind { Glorot, Normal02 };

enum class Mode { Train, Infer };

// Widest supported convolution kernel.
inline constexpr std::size_t kMaxKernelWidth = 7;

Var apply_activation(const Var& x, Activation act);

// Parameters live in `store` under `prefix` and are created on first use, so
// a model's creation order (and thus its init stream) follows its first
// forward pass.

// x: [R,in] or [N,T,in]; returns the same rank with the last axis replaced.
Var dense(ParamStore& store, const std::string& prefix, const Var& x, std::size_t in,
          std::size_t out, Activation act, Rng& init_rng, InitKind init = InitKind::Glorot);

// Trainable table lookup; indices must be < vocab.
Var embedding_lookup(ParamStore& store, const std::string& prefix,
                     const std::vector<int>& indices, std::size_t vocab, std::size_t dim,
                     Rng& init_rng, InitKind init = InitKind::Glorot);

// Gather rows of a fixed table; plain tensors, no graph.
Tensor embed_rows(const Tensor& table, const std::vector<int>& indices);

struct LstmOut {
  Var sequence;     // [N,T,units]
  Var final_state;  // [N,units]
};

// x: [N,T,in]. Gate layout i|f|g|o. Initial state is zero.
LstmOut lstm(ParamStore& store, const std::string& prefix, const Var& x, std::size_t in,
             std::size_t units, Rng& init_rng);

// Forward and reverse passes concatenated; sequence [N,T,2*units],
// final_state [N,2*units] (forward at T-1, reverse at 0).
LstmOut bidirectional_lstm(ParamStore& store, const std::string& prefix, const Var& x,
                           std::size_t in, std::size_t units, Rng& init_rng);

// Same-padding 1-D convolution over [N,T,in_ch]; output [N,ceil(T/stride),out_ch].
// stride must be 1 or 2 and kernel width at most kMaxKernelWidth.
Var conv1d(ParamStore& store, const std::string& prefix, const Var& x, std::size_t in_ch,
           std::size_t out_ch, std::size_t kernel, std::size_t stride, Activation act,
           Rng& init_rng, InitKind init = InitKind::Glorot);

// Adjoint of the stride-2 same-padding convolution: [N,T,in_ch] ->
// [N,2*T,out_ch]. The kernel is stored as [kernel, out_ch, in_ch] so a
// convolution with the same tensor is the exact transpose map.
Var conv1d_transpose(ParamStore& store, const std::string& prefix, const Var& x,
                     std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Activation act,
                     Rng& init_rng, InitKind init = InitKind::Glorot);

// Width-2 max pooling over [N,T,C]; odd T repeats the last frame.
Var max_pool1d(const Var& x);

Var global_avg_pool1d(const Var& x);  // [N,T,C] -> [N,C]

// x: [N,C] or [N,T,C]; statistics are per channel over all leading axes.
// Train mode normalizes with batch statistics and folds them into the
// running buffers; infer mode uses the buffers and leaves them untouched.
Var batch_norm1d(ParamStore& store, const std::string& prefix, const Var& x,
                 std::size_t channels, Mode mode, double momentum = 0.9, double eps = 1e-5);

// Inverted dropout; infer mode and rate 0 are identity.
Var dropout(const Var& x, double rate, Mode mode, Rng& rng);

// Self-attention with `heads` heads over [T,dim] or [N,T,dim]; heads must
// divide dim.
Var multi_head_attention(ParamStore& store, const std::string& prefix, const Var& x,
                         std::size_t dim, std::size_t heads, Rng& init_rng);

// [N,D] -> [N,times,D] (or [D] -> [times,D]).
Var repeat_vector(const Var& x, std::size_t times);

enum class LayerKind {
  Dense,
  EmbeddingLookup,
  Lstm,
  BidirectionalLstm,
  Conv1d,
  Conv1dTranspose,
  MaxPool1d,
  GlobalAvgPool1d,
  BatchNorm1d,
  Dropout,
  MultiHeadAttention,
  RepeatVector,
};

// Declarative layer description used by the spec-driven builders and the
// gradient test suite.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t input_dim = 0;  // dense/lstm input width, conv in channels, bn/attention dim
  std::size_t units = 0;      // dense/lstm width, conv out channels, embedding dim
  Activation activation = Activation::Linear;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t heads = 1;
  double rate = 0.0;   // dropout
  std::size_t times = 0;  // repeat-vector
  std::size_t vocab = 0;  // embedding rows

  void validate() const;  // throws DataError on out-of-range fields
};

// Runs one layer described by `spec` on `x`. Embedding lookups take their
// indices via `indices`; dropout draws its mask from `mask_rng` (required in
// train mode when rate > 0).
Var layer_forward(const LayerSpec& spec, ParamStore& store, const std::string& prefix,
                  const Var& x, Mode mode, Rng& init_rng, Rng* mask_rng = nullptr,
                  const std::vector<int>* indices = nullptr);

const char* layer_kind_name(LayerKind kind);

}  // namespace genfeat
