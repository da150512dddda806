#include "genfeat/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "genfeat/errors.hpp"
#include "genfeat/layers.hpp"
#include "genfeat/losses.hpp"

namespace genfeat {

namespace {

void check_config(const VaeConfig& c) {
  if (c.seq_len == 0 || c.input_dim == 0 || c.hidden == 0 || c.latent == 0)
    throw DataError("vae: every dimension must be positive");
}

VaeEncoded encode_impl(VaeModel& m, const Var& x, Rng& rng) {
  const VaeConfig& c = m.cfg;
  LstmOut enc = lstm(m.params, "vae/enc/lstm", x, c.input_dim, c.hidden, rng);
  Var h = dense(m.params, "vae/enc/dense", enc.sequence, c.hidden, c.hidden,
                Activation::Elu, rng);
  VaeEncoded out;
  out.mu = dense(m.params, "vae/enc/mu", h, c.hidden, c.latent, Activation::Linear, rng);
  out.logvar =
      dense(m.params, "vae/enc/logvar", h, c.hidden, c.latent, Activation::Linear, rng);
  return out;
}

Var decode_impl(VaeModel& m, const Var& z, Rng& rng) {
  const VaeConfig& c = m.cfg;
  LstmOut d1 = lstm(m.params, "vae/dec/lstm1", z, c.latent, c.hidden, rng);
  LstmOut d2 = lstm(m.params, "vae/dec/lstm2", d1.sequence, c.hidden, c.hidden, rng);
  return dense(m.params, "vae/dec/out", d2.sequence, c.hidden, c.input_dim,
               Activation::Linear, rng);
}

void check_doc_shape(const Tensor& x, const VaeConfig& c, const char* what) {
  if (x.shape() != std::vector<std::size_t>{c.seq_len, c.input_dim})
    throw DataError(std::string(what) + ": expected shape [" + std::to_string(c.seq_len) +
                    "," + std::to_string(c.input_dim) + "]");
}

Tensor stack_docs(const std::vector<Tensor>& docs, const std::vector<std::size_t>& order,
                  std::size_t offset, std::size_t n, const VaeConfig& c) {
  Tensor x({n, c.seq_len, c.input_dim});
  const std::size_t stride = c.seq_len * c.input_dim;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& d = docs[order[offset + i]];
    std::copy(d.data(), d.data() + stride, x.data() + i * stride);
  }
  return x;
}

Tensor draw_normal(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

VaeModel vae_init(const VaeConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  VaeModel m;
  m.cfg = cfg;
  // One throwaway forward materializes every parameter in a fixed order so
  // the initialization depends only on (cfg, seed).
  Rng rng(stage_seed(seed, "vae/init"));
  Var x(Tensor({1, cfg.seq_len, cfg.input_dim}));
  VaeEncoded enc = encode_impl(m, x, rng);
  Var z(Tensor({1, cfg.seq_len, cfg.latent}));
  decode_impl(m, z, rng);
  (void)enc;
  return m;
}

VaeEncoded vae_encode_batch(VaeModel& model, const Var& x) {
  if (x.shape().size() != 3 || x.shape()[1] != model.cfg.seq_len ||
      x.shape()[2] != model.cfg.input_dim)
    throw DataError("vae_encode_batch: expected [N," + std::to_string(model.cfg.seq_len) +
                    "," + std::to_string(model.cfg.input_dim) + "]");
  Rng scratch(0);  // parameters already exist; never consumed
  return encode_impl(model, x, scratch);
}

Var vae_decode_batch(VaeModel& model, const Var& z) {
  if (z.shape().size() != 3 || z.shape()[1] != model.cfg.seq_len ||
      z.shape()[2] != model.cfg.latent)
    throw DataError("vae_decode_batch: expected [N," + std::to_string(model.cfg.seq_len) +
                    "," + std::to_string(model.cfg.latent) + "]");
  Rng scratch(0);
  return decode_impl(model, z, scratch);
}

Var reparameterize(const Var& mu, const Var& logvar, const Tensor& eps) {
  if (mu.shape() != logvar.shape() || mu.shape() != eps.shape())
    throw DataError("reparameterize: mu, logvar and eps shapes must match");
  Var sigma = exp_v(scale(logvar, 0.5));
  return add(mu, mul(sigma, Var(eps)));
}

Var vae_loss(const Var& recon, const Tensor& target, const Var& mu, const Var& logvar,
             double beta) {
  Var mse = mean_squared_error(recon, target);
  if (beta == 0.0) return mse;
  return add(mse, scale(kl_gaussian(mu, logvar), beta));
}

LatentGaussian vae_encode(VaeModel& model, const Tensor& x) {
  check_doc_shape(x, model.cfg, "vae_encode");
  Tensor batched({1, model.cfg.seq_len, model.cfg.input_dim},
                 std::vector<real>(x.data(), x.data() + x.numel()));
  VaeEncoded enc = vae_encode_batch(model, Var(std::move(batched)));
  LatentGaussian out;
  out.mu = Tensor({model.cfg.seq_len, model.cfg.latent},
                  std::vector<real>(enc.mu.value().data(),
                                    enc.mu.value().data() + enc.mu.value().numel()));
  out.logvar =
      Tensor({model.cfg.seq_len, model.cfg.latent},
             std::vector<real>(enc.logvar.value().data(),
                               enc.logvar.value().data() + enc.logvar.value().numel()));
  return out;
}

Tensor vae_decode(VaeModel& model, const Tensor& z) {
  if (z.shape() != std::vector<std::size_t>{model.cfg.seq_len, model.cfg.latent})
    throw DataError("vae_decode: expected shape [" + std::to_string(model.cfg.seq_len) +
                    "," + std::to_string(model.cfg.latent) + "]");
  Tensor batched({1, model.cfg.seq_len, model.cfg.latent},
                 std::vector<real>(z.data(), z.data() + z.numel()));
  Var recon = vae_decode_batch(model, Var(std::move(batched)));
  return Tensor({model.cfg.seq_len, model.cfg.input_dim},
                std::vector<real>(recon.value().data(),
                                  recon.value().data() + recon.value().numel()));
}

VaeHistory train_vae(VaeModel& model, const std::vector<Tensor>& docs,
                     const VaeTrainConfig& tc, std::uint64_t seed) {
  if (docs.empty()) throw DataError("train_vae: training corpus is empty");
  if (tc.epochs == 0 || tc.batch == 0) throw DataError("train_vae: epochs and batch must be positive");
  if (!(tc.lr > 0.0)) throw DataError("train_vae: learning rate must be positive");
  if (!(tc.beta >= 0.0)) throw DataError("train_vae: beta must be non-negative");
  for (const Tensor& d : docs) check_doc_shape(d, model.cfg, "train_vae");

  Rng shuffle_rng(stage_seed(seed, "vae/shuffle"));
  Rng eps_rng(stage_seed(seed, "vae/eps"));
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);

  // Anneal schedule: zero KL weight at epoch 0, full weight from epoch
  // ceil(epochs/10) onwards.
  const std::size_t warm = std::max<std::size_t>(1, tc.epochs / 10);

  VaeHistory hist;
  hist.epoch_loss.reserve(tc.epochs);
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double beta_e =
        tc.anneal ? tc.beta * std::min(1.0, static_cast<double>(epoch) / warm) : tc.beta;
    shuffle_rng.shuffle(order);
    double sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t off = 0; off < docs.size(); off += tc.batch) {
      const std::size_t n = std::min(tc.batch, docs.size() - off);
      Var x(stack_docs(docs, order, off, n, model.cfg));
      VaeEncoded enc = vae_encode_batch(model, x);
      Tensor eps = draw_normal(eps_rng, {n, model.cfg.seq_len, model.cfg.latent});
      Var z = reparameterize(enc.mu, enc.logvar, eps);
      Var recon = vae_decode_batch(model, z);
      Var loss = vae_loss(recon, x.value(), enc.mu, enc.logvar, beta_e);
      auto grads = gradients(loss, model.params);
      adam_step(model.params, grads, tc.lr);
      sum += loss.value().data()[0] * static_cast<double>(n);
      seen += n;
    }
    hist.epoch_loss.push_back(sum / static_cast<double>(seen));
  }
  model.trained = true;
  return hist;
}

Tensor extract_features_vae(VaeModel& model, const Tensor& x, Rng* eps_rng,
                            std::string* warning) {
  if (!model.trained && warning)
    *warning = "extracting features from an untrained autoencoder";
  LatentGaussian enc = vae_encode(model, x);
  if (eps_rng == nullptr) return enc.mu;
  Tensor z = enc.mu;
  for (std::size_t i = 0; i < z.numel(); ++i)
    z.data()[i] += std::exp(0.5 * enc.logvar.data()[i]) * eps_rng->normal();
  return z;
}

}  // namespace genfeat
