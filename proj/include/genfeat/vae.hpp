#pragma once

#include <cstdint>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/optim.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// Recurrent variational autoencoder over embedded token sequences.
// Encoder: LSTM(hidden) -> Dense(hidden, ELU) -> per-position mu/logvar heads
// of width `latent`. Decoder: LSTM(hidden) -> LSTM(hidden) -> Dense(input_dim).
struct VaeConfig {
  std::size_t seq_len = 200;
  std::size_t input_dim = 128;
  std::size_t hidden = 64;
  std::size_t latent = 32;
};

struct VaeModel {
  VaeConfig cfg;
  ParamStore params;
  bool trained = false;
};

// Per-position Gaussian posterior parameters, both [T, latent].
struct LatentGaussian {
  Tensor mu;
  Tensor logvar;
};

struct VaeTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch = 256;
  double lr = 1e-3;
  double beta = 1.0;
  // When set, the KL weight ramps linearly from 0 to `beta` across the first
  // tenth of the epochs and stays at `beta` afterwards.
  bool anneal = false;
};

struct VaeHistory {
  std::vector<double> epoch_loss;   // mean per-document loss, one entry per epoch
};

// Creates every parameter up front so checkpoints written before training
// carry the full (seeded) initialization.
VaeModel vae_init(const VaeConfig& cfg, std::uint64_t seed);

// Graph-building forwards over a batch [N, T, input_dim]; mu/logvar come back
// as [N, T, latent] and the reconstruction as [N, T, input_dim].
struct VaeEncoded {
  Var mu;
  Var logvar;
};
VaeEncoded vae_encode_batch(VaeModel& model, const Var& x);
Var vae_decode_batch(VaeModel& model, const Var& z);

// z = mu + exp(logvar / 2) * eps, elementwise; eps must match mu's shape.
Var reparameterize(const Var& mu, const Var& logvar, const Tensor& eps);

// Reconstruction MSE plus beta times the summed Gaussian KL.
Var vae_loss(const Var& recon, const Tensor& target, const Var& mu,
             const Var& logvar, double beta);

// Single-document conveniences; x is [T, input_dim], z is [T, latent].
LatentGaussian vae_encode(VaeModel& model, const Tensor& x);
Tensor vae_decode(VaeModel& model, const Tensor& z);

// Adam training over embedded documents (each [T, input_dim]). The seed
// drives batch shuffling and reparameterization noise; identical inputs and
// seed reproduce the history and final parameters exactly.
VaeHistory train_vae(VaeModel& model, const std::vector<Tensor>& docs,
                     const VaeTrainConfig& tc, std::uint64_t seed);

// Per-position latent features [T, latent]. With `eps_rng` null the output is
// the deterministic posterior mean; otherwise one reparameterized sample.
// Extracting from an untrained model is allowed; `warning` (when non-null)
// receives a note in that case.
Tensor extract_features_vae(VaeModel& model, const Tensor& x, Rng* eps_rng,
                            std::string* warning = nullptr);

}  // namespace genfeat
