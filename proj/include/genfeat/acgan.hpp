#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/layers.hpp"
#include "genfeat/optim.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// Class-conditional GAN over embedded token sequences.
//
// Generator: noise -> Dense(base_t * gen_ch, LeakyReLU) reshaped to
// [base_t, gen_ch]; the class label -> Embedding(classes, label_dim) ->
// Dense(base_t) reshaped to [base_t, 1]; both concatenated on the channel
// axis and upsampled by two stride-2 transposed convolutions
// (gen_ch+1 -> g_ch1, LeakyReLU; g_ch1 -> emb_dim, linear) to
// [seq_len, emb_dim], with base_t = seq_len / 4.
//
// Discriminator: four same-padding convolutions d_ch1..d_ch4 (stages three
// and four use stride 2), each followed by batch norm (stages two to four),
// LeakyReLU and dropout, then a flatten into a sigmoid real/fake head and a
// softmax class head. The stage-two activation map is the feature tap.
//
// Every trainable tensor uses Gaussian(0, 0.02) initialization.
struct AcganConfig {
  std::size_t latent = 100;
  std::size_t classes = 7;
  std::size_t label_dim = 50;
  std::size_t seq_len = 200;  // must be divisible by 4
  std::size_t emb_dim = 128;
  std::size_t gen_ch = 384;
  std::size_t g_ch1 = 64;
  std::size_t d_ch1 = 64;
  std::size_t d_ch2 = 32;  // tap width
  std::size_t d_ch3 = 64;
  std::size_t d_ch4 = 128;
  std::size_t kernel = 5;
  double dropout_rate = 0.4;
};

struct AcganModel {
  AcganConfig cfg;
  ParamStore params;  // generator under "acgan/g/", discriminator under "acgan/d/"
  bool trained = false;
};

struct DiscOut {
  Var realness;     // [N,1], sigmoid
  Var class_probs;  // [N,classes], softmax rows
  Var tap;          // [N,seq_len,d_ch2], stage-two activations
};

// Creates every parameter up front; initialization depends only on (cfg, seed).
AcganModel acgan_init(const AcganConfig& cfg, std::uint64_t seed);

// Graph-building batch forwards. z is [N,latent]; labels.size() == N and each
// label lies in [0, classes). Returns [N,seq_len,emb_dim].
Var generator_forward_batch(AcganModel& model, const Var& z, const std::vector<int>& labels);

// x is [N,seq_len,emb_dim]. Train mode uses batch statistics and live
// dropout (drawing from `dropout_rng`); infer mode uses the running buffers
// and disables dropout without touching either.
DiscOut discriminator_forward_batch(AcganModel& model, const Var& x, Mode mode,
                                    Rng& dropout_rng);

// Single-sample generation; z is [latent]. The sequence comes back in
// channels-first orientation [emb_dim, seq_len].
Tensor acgan_generate(AcganModel& model, const Tensor& z, int label);

// Stage-two discriminator activations for one document x [seq_len,emb_dim],
// inference mode, in channels-first orientation [d_ch2, seq_len].
Tensor acgan_tap(AcganModel& model, const Tensor& x);

// Per-position features [seq_len, d_ch2]: the tap transposed back to
// positions-first order. `warning` (when non-null) is set if the model has
// not been trained.
Tensor extract_features_acgan(AcganModel& model, const Tensor& x,
                              std::string* warning = nullptr);

struct AcganTrainConfig {
  std::size_t epochs = 5000;
  std::size_t batch = 200;  // even; half real and half generated per step
  double lr = 2e-3;
  double beta1 = 0.5;
};

struct AcganHistory {
  std::vector<double> d_loss;  // one entry per step
  std::vector<double> g_loss;
};

// phase 0: after the discriminator update; phase 1: after the generator
// update. Observers may inspect the model between phases.
struct AcganStepInfo {
  std::size_t epoch = 0;
  std::size_t step = 0;
  int phase = 0;
  double loss = 0.0;
};
using AcganObserver = std::function<void(const AcganStepInfo&)>;

// Alternating adversarial training. Each step first updates the
// discriminator on half real and half freshly generated (detached) sequences
// with a real/fake term plus a class term (generated rows keep their
// conditioning label), then updates only the generator through the frozen
// discriminator run in inference mode. Discriminator parameters and running
// statistics are bit-identical across the generator phase.
AcganHistory train_acgan(AcganModel& model, const std::vector<Tensor>& docs,
                         const std::vector<int>& labels, const AcganTrainConfig& tc,
                         std::uint64_t seed, const AcganObserver& observer = nullptr);

}  // namespace genfeat
