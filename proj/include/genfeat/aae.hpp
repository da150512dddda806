#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/optim.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// Adversarial autoencoder over embedded token sequences.
//
// Encoder: LSTM(hidden) -> LSTM(hidden) -> Dense(hidden, LeakyReLU) ->
// per-position mu/logvar heads of width `latent`. Decoder mirrors it:
// LSTM(hidden) -> LSTM(hidden) -> Dense(input_dim, sigmoid), so every
// reconstructed value lies in (0,1). A small dense discriminator scores
// individual latent vectors (rows of [*, latent]) as coming from the prior:
// Dense(hidden, LeakyReLU) -> Dense(latent, LeakyReLU) -> Dense(1, sigmoid).
struct AaeConfig {
  std::size_t seq_len = 200;
  std::size_t input_dim = 128;
  std::size_t hidden = 64;
  std::size_t latent = 32;
};

struct AaeModel {
  AaeConfig cfg;
  ParamStore params;  // encoder "aae/enc/", decoder "aae/dec/", critic "aae/disc/"
  bool trained = false;
};

struct AaeEncoded {
  Var mu;      // [N,T,latent]
  Var logvar;  // [N,T,latent]
};

// Creates every parameter up front; initialization depends only on (cfg, seed).
AaeModel aae_init(const AaeConfig& cfg, std::uint64_t seed);

// Graph-building batch forwards; x is [N,T,input_dim], z is [N,T,latent].
AaeEncoded aae_encode_batch(AaeModel& model, const Var& x);
Var aae_decode_batch(AaeModel& model, const Var& z);

// Scores rows of `codes` ([n, latent]) as prior samples; returns [n,1].
Var aae_discriminate(AaeModel& model, const Var& codes);

// Single-document conveniences; x is [T,input_dim], z is [T,latent].
struct AaeLatent {
  Tensor mu;
  Tensor logvar;
};
AaeLatent aae_encode(AaeModel& model, const Tensor& x);
Tensor aae_decode(AaeModel& model, const Tensor& z);

struct AaeTrainConfig {
  std::size_t epochs = 5000;
  std::size_t batch = 200;   // documents per reconstruction step
  std::size_t n_real = 100;  // prior draws per critic step
  std::size_t n_fake = 100;  // encoded documents per critic step
  double lr = 2e-3;
  double beta1_disc = 0.5;  // critic and encoder-fooling phases
  double beta1_ae = 0.9;    // reconstruction phase
};

struct AaeHistory {
  std::vector<double> disc_loss;  // one entry per step and phase
  std::vector<double> recon_loss;
  std::vector<double> fool_loss;
};

// phase 0: after the critic update; phase 1: after the reconstruction
// update; phase 2: after the encoder regularization update.
struct AaeStepInfo {
  std::size_t epoch = 0;
  std::size_t step = 0;
  int phase = 0;
  double loss = 0.0;
};
using AaeObserver = std::function<void(const AaeStepInfo&)>;

// Three-phase training per step. Phase one trains the critic on detached
// fresh-noise encodings of `n_fake` documents (label 0) against `n_real`
// standard-normal draws (label 1). Phase two trains encoder and decoder on
// the reconstruction error of the whole batch. Phase three freezes the
// critic and pushes the encoder to make its codes score as prior samples.
// Each phase updates only its own sub-network; the other parameters stay
// bit-identical.
AaeHistory train_aae(AaeModel& model, const std::vector<Tensor>& docs,
                     const AaeTrainConfig& tc, std::uint64_t seed,
                     const AaeObserver& observer = nullptr);

// Per-position latent features [T, latent]. With `eps_rng` null the output is
// the deterministic posterior mean; otherwise one reparameterized sample.
Tensor extract_features_aae(AaeModel& model, const Tensor& x, Rng* eps_rng,
                            std::string* warning = nullptr);

}  // namespace genfeat
