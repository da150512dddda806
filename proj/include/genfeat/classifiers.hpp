#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/layers.hpp"
#include "genfeat/optim.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// Benchmark classifier families, all ending in a softmax over `classes`:
//  - Lstm: stacked LSTM layers, final state -> softmax.
//  - Bilstm: stacked bidirectional LSTM layers, final state -> softmax.
//  - BilstmAttention: bidirectional stack -> multi-head self-attention ->
//    global average pooling -> softmax.
//  - Cnn: four conv(ELU) + max-pool stages -> global average pooling ->
//    softmax.
//  - Clstm: three conv(ELU) + max-pool stages feeding the pooled frame
//    sequence into four stacked LSTM layers, final state -> softmax.
enum class ClassifierKind { Lstm, Bilstm, BilstmAttention, Cnn, Clstm };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Lstm;
  std::size_t input_len = 200;
  std::size_t input_dim = 32;
  std::size_t classes = 7;
  std::size_t hidden_layers = 4;  // recurrent kinds; tuning range 4..8
  std::size_t units = 128;        // recurrent width; tuning range 32..256
  std::size_t heads = 4;          // attention kind; must divide 2*units
  // cnn consumes all four conv entries, clstm the first three.
  std::vector<std::size_t> conv_filters = {128, 128, 256, 256};  // each <= 512
  std::vector<std::size_t> conv_kernels = {5, 5, 3, 3};          // each <= 7
  std::vector<std::size_t> lstm_units = {128, 128, 64, 64};      // clstm stack
  double dropout_rate = 0.2;  // between stacked blocks and before the head

  // Structural checks always run; `enforce_ranges` additionally pins the
  // tuning-range bounds above (diagnostic configs may drop below them).
  void validate(bool enforce_ranges = true) const;
};

struct Classifier {
  ClassifierSpec spec;
  ParamStore params;
  bool trained = false;
};

// Creates every parameter up front; initialization depends only on
// (spec, seed).
Classifier build_classifier(const ClassifierSpec& spec, std::uint64_t seed,
                            bool enforce_ranges = true);

// Graph-building forward over a batch [N, input_len, input_dim]; returns
// class probabilities [N, classes] (softmax rows). Train mode applies
// dropout and needs `dropout_rng` whenever the rate is nonzero; infer mode
// never consumes it.
Var classifier_forward(Classifier& model, const Var& x, Mode mode,
                       Rng* dropout_rng = nullptr);

std::size_t classifier_param_count(const Classifier& model);

struct Prediction {
  std::vector<double> probs;
  int label = 0;  // argmax; ties resolve to the lower index
};

Prediction classify(Classifier& model, const Tensor& x);
std::vector<Prediction> classify_batch(Classifier& model, const std::vector<Tensor>& xs);

struct ClassifierTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::size_t patience = 10;  // epochs without validation improvement
  std::optional<std::vector<real>> class_weights;  // per class, uniform when absent
};

struct ClassifierHistory {
  std::vector<double> train_loss;  // batch-weighted mean per epoch actually run
  std::vector<double> val_recall;  // macro recall per epoch
  std::size_t best_epoch = 0;
  double best_val_recall = 0.0;
  bool stopped_early = false;
};

// Weighted cross-entropy training with per-epoch macro-recall validation.
// The parameters from the best validation epoch (earliest on ties) are
// restored into the model before returning. Every class must appear in the
// training labels.
ClassifierHistory train_classifier(Classifier& model, const std::vector<Tensor>& train_x,
                                   const std::vector<int>& train_y,
                                   const std::vector<Tensor>& val_x,
                                   const std::vector<int>& val_y,
                                   const ClassifierTrainConfig& tc, std::uint64_t seed);

// Index of the candidate with the highest validation recall; ties prefer
// fewer parameters, then the earlier index. Sizes must match and be nonzero.
std::size_t select_best(const std::vector<Classifier>& models,
                        const std::vector<double>& val_recalls);

}  // namespace genfeat
