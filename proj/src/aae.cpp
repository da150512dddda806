#include "genfeat/aae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "genfeat/errors.hpp"
#include "genfeat/layers.hpp"
#include "genfeat/losses.hpp"
#include "genfeat/vae.hpp"

namespace genfeat {

namespace {

void check_cfg(const AaeConfig& c) {
  if (c.seq_len == 0 || c.input_dim == 0 || c.hidden == 0 || c.latent == 0)
    throw DataError("aae: every dimension must be positive");
}

void check_doc(const Tensor& d, const AaeConfig& c, const char* what) {
  if (d.shape() != std::vector<std::size_t>{c.seq_len, c.input_dim})
    throw DataError(std::string(what) + ": expected document shape [" +
                    std::to_string(c.seq_len) + "," + std::to_string(c.input_dim) + "]");
}

AaeEncoded encode_impl(AaeModel& m, const Var& x, Rng& rng) {
  const AaeConfig& c = m.cfg;
  LstmOut e1 = lstm(m.params, "aae/enc/lstm1", x, c.input_dim, c.hidden, rng);
  LstmOut e2 = lstm(m.params, "aae/enc/lstm2", e1.sequence, c.hidden, c.hidden, rng);
  Var h = dense(m.params, "aae/enc/dense", e2.sequence, c.hidden, c.hidden,
                Activation::LeakyRelu, rng);
  AaeEncoded out;
  out.mu = dense(m.params, "aae/enc/mu", h, c.hidden, c.latent, Activation::Linear, rng);
  out.logvar =
      dense(m.params, "aae/enc/logvar", h, c.hidden, c.latent, Activation::Linear, rng);
  return out;
}

Var decode_impl(AaeModel& m, const Var& z, Rng& rng) {
  const AaeConfig& c = m.cfg;
  LstmOut d1 = lstm(m.params, "aae/dec/lstm1", z, c.latent, c.hidden, rng);
  LstmOut d2 = lstm(m.params, "aae/dec/lstm2", d1.sequence, c.hidden, c.hidden, rng);
  return dense(m.params, "aae/dec/out", d2.sequence, c.hidden, c.input_dim,
               Activation::Sigmoid, rng);
}

Var disc_impl(AaeModel& m, const Var& codes, Rng& rng) {
  const AaeConfig& c = m.cfg;
  if (codes.shape().size() != 2 || codes.shape()[1] != c.latent)
    throw DataError("aae_discriminate: codes must be [n," + std::to_string(c.latent) + "]");
  Var h1 = dense(m.params, "aae/disc/d1", codes, c.latent, c.hidden, Activation::LeakyRelu, rng);
  Var h2 = dense(m.params, "aae/disc/d2", h1, c.hidden, c.latent, Activation::LeakyRelu, rng);
  return dense(m.params, "aae/disc/out", h2, c.latent, 1, Activation::Sigmoid, rng);
}

Tensor draw_normal(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

AaeModel aae_init(const AaeConfig& cfg, std::uint64_t seed) {
  check_cfg(cfg);
  AaeModel m;
  m.cfg = cfg;
  // Throwaway forwards materialize parameters in a fixed order: encoder,
  // decoder, critic.
  Rng rng(stage_seed(seed, "aae/init"));
  encode_impl(m, Var(Tensor({1, cfg.seq_len, cfg.input_dim})), rng);
  decode_impl(m, Var(Tensor({1, cfg.seq_len, cfg.latent})), rng);
  disc_impl(m, Var(Tensor({1, cfg.latent})), rng);
  return m;
}

AaeEncoded aae_encode_batch(AaeModel& model, const Var& x) {
  if (x.shape().size() != 3 || x.shape()[1] != model.cfg.seq_len ||
      x.shape()[2] != model.cfg.input_dim)
    throw DataError("aae_encode_batch: expected [N," + std::to_string(model.cfg.seq_len) +
                    "," + std::to_string(model.cfg.input_dim) + "]");
  Rng scratch(0);  // parameters already exist; never consumed
  return encode_impl(model, x, scratch);
}

Var aae_decode_batch(AaeModel& model, const Var& z) {
  if (z.shape().size() != 3 || z.shape()[1] != model.cfg.seq_len ||
      z.shape()[2] != model.cfg.latent)
    throw DataError("aae_decode_batch: expected [N," + std::to_string(model.cfg.seq_len) +
                    "," + std::to_string(model.cfg.latent) + "]");
  Rng scratch(0);
  return decode_impl(model, z, scratch);
}

Var aae_discriminate(AaeModel& model, const Var& codes) {
  Rng scratch(0);
  return disc_impl(model, codes, scratch);
}

AaeLatent aae_encode(AaeModel& model, const Tensor& x) {
  check_doc(x, model.cfg, "aae_encode");
  Tensor batched({1, model.cfg.seq_len, model.cfg.input_dim},
                 std::vector<real>(x.data(), x.data() + x.numel()));
  AaeEncoded enc = aae_encode_batch(model, Var(std::move(batched)));
  AaeLatent out;
  out.mu = Tensor({model.cfg.seq_len, model.cfg.latent},
                  std::vector<real>(enc.mu.value().data(),
                                    enc.mu.value().data() + enc.mu.value().numel()));
  out.logvar =
      Tensor({model.cfg.seq_len, model.cfg.latent},
             std::vector<real>(enc.logvar.value().data(),
                               enc.logvar.value().data() + enc.logvar.value().numel()));
  return out;
}

Tensor aae_decode(AaeModel& model, const Tensor& z) {
  if (z.shape() != std::vector<std::size_t>{model.cfg.seq_len, model.cfg.latent})
    throw DataError("aae_decode: expected shape [" + std::to_string(model.cfg.seq_len) +
                    "," + std::to_string(model.cfg.latent) + "]");
  Tensor batched({1, model.cfg.seq_len, model.cfg.latent},
                 std::vector<real>(z.data(), z.data() + z.numel()));
  Var recon = aae_decode_batch(model, Var(std::move(batched)));
  return Tensor({model.cfg.seq_len, model.cfg.input_dim},
                std::vector<real>(recon.value().data(),
                                  recon.value().data() + recon.value().numel()));
}

AaeHistory train_aae(AaeModel& model, const std::vector<Tensor>& docs,
                     const AaeTrainConfig& tc, std::uint64_t seed,
                     const AaeObserver& observer) {
  const AaeConfig& c = model.cfg;
  if (docs.empty()) throw DataError("train_aae: training corpus is empty");
  for (const Tensor& d : docs) check_doc(d, c, "train_aae");
  if (tc.epochs == 0 || tc.batch == 0)
    throw DataError("train_aae: epochs and batch must be positive");
  if (tc.n_real == 0 || tc.n_fake == 0)
    throw DataError("train_aae: critic sample counts must be positive");
  if (tc.n_real + tc.n_fake > tc.batch)
    throw DataError("train_aae: critic sample counts exceed the batch size");
  if (!(tc.lr > 0.0)) throw DataError("train_aae: learning rate must be positive");

  Rng shuffle_rng(stage_seed(seed, "aae/shuffle"));
  Rng eps_rng(stage_seed(seed, "aae/eps"));
  Rng prior_rng(stage_seed(seed, "aae/prior"));

  const std::size_t doc_elems = c.seq_len * c.input_dim;
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle before the first draw
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, docs.size() / tc.batch);
  const std::size_t rows_per_doc = c.seq_len;

  AaeHistory hist;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      Tensor batch({tc.batch, c.seq_len, c.input_dim});
      for (std::size_t i = 0; i < tc.batch; ++i) {
        if (cursor == order.size()) {
          shuffle_rng.shuffle(order);
          cursor = 0;
        }
        std::copy(docs[order[cursor]].data(), docs[order[cursor]].data() + doc_elems,
                  batch.data() + i * doc_elems);
        ++cursor;
      }

      // Phase one: critic on detached encoder codes vs prior draws.
      {
        Tensor fake_docs({tc.n_fake, c.seq_len, c.input_dim},
                         std::vector<real>(batch.data(), batch.data() + tc.n_fake * doc_elems));
        AaeEncoded enc = aae_encode_batch(model, Var(std::move(fake_docs)));
        Tensor eps = draw_normal(eps_rng, {tc.n_fake, c.seq_len, c.latent});
        Var z = reparameterize(enc.mu, enc.logvar, eps);
        const std::size_t fake_rows = tc.n_fake * rows_per_doc;
        const std::size_t real_rows = tc.n_real * rows_per_doc;
        Tensor codes({fake_rows + real_rows, c.latent});
        std::copy(z.value().data(), z.value().data() + fake_rows * c.latent, codes.data());
        Tensor prior = draw_normal(prior_rng, {real_rows, c.latent});
        std::copy(prior.data(), prior.data() + prior.numel(),
                  codes.data() + fake_rows * c.latent);
        Tensor target({fake_rows + real_rows, 1});
        for (std::size_t i = fake_rows; i < fake_rows + real_rows; ++i)
          target.data()[i] = 1.0;
        Var score = aae_discriminate(model, Var(std::move(codes)));
        Var loss = binary_cross_entropy(score, target);
        auto grads = filter_grads(gradients(loss, model.params), "aae/disc/");
        adam_step(model.params, grads, tc.lr, tc.beta1_disc);
        hist.disc_loss.push_back(loss.value().data()[0]);
        if (observer) observer({epoch, step, 0, hist.disc_loss.back()});
      }

      // Phase two: reconstruction over the full batch.
      {
        Var x(batch);
        AaeEncoded enc = aae_encode_batch(model, x);
        Tensor eps = draw_normal(eps_rng, {tc.batch, c.seq_len, c.latent});
        Var z = reparameterize(enc.mu, enc.logvar, eps);
        Var recon = aae_decode_batch(model, z);
        Var loss = mean_squared_error(recon, batch);
        auto all = gradients(loss, model.params);
        auto grads = filter_grads(all, "aae/enc/");
        auto dec = filter_grads(all, "aae/dec/");
        grads.insert(dec.begin(), dec.end());
        adam_step(model.params, grads, tc.lr, tc.beta1_ae);
        hist.recon_loss.push_back(loss.value().data()[0]);
        if (observer) observer({epoch, step, 1, hist.recon_loss.back()});
      }

      // Phase three: frozen critic, encoder pushed toward the prior.
      {
        Tensor fake_docs({tc.n_fake, c.seq_len, c.input_dim},
                         std::vector<real>(batch.data(), batch.data() + tc.n_fake * doc_elems));
        AaeEncoded enc = aae_encode_batch(model, Var(std::move(fake_docs)));
        Tensor eps = draw_normal(eps_rng, {tc.n_fake, c.seq_len, c.latent});
        Var z = reparameterize(enc.mu, enc.logvar, eps);
        Var rows = reshape(z, {tc.n_fake * rows_per_doc, c.latent});
        Var score = aae_discriminate(model, rows);
        Tensor want_real({tc.n_fake * rows_per_doc, 1});
        for (std::size_t i = 0; i < want_real.numel(); ++i) want_real.data()[i] = 1.0;
        Var loss = binary_cross_entropy(score, want_real);
        auto grads = filter_grads(gradients(loss, model.params), "aae/enc/");
        adam_step(model.params, grads, tc.lr, tc.beta1_disc);
        hist.fool_loss.push_back(loss.value().data()[0]);
        if (observer) observer({epoch, step, 2, hist.fool_loss.back()});
      }
    }
  }
  model.trained = true;
  return hist;
}

Tensor extract_features_aae(AaeModel& model, const Tensor& x, Rng* eps_rng,
                            std::string* warning) {
  if (!model.trained && warning)
    *warning = "extracting features from an untrained adversarial autoencoder";
  AaeLatent enc = aae_encode(model, x);
  if (eps_rng == nullptr) return enc.mu;
  Tensor z = enc.mu;
  for (std::size_t i = 0; i < z.numel(); ++i)
    z.data()[i] += std::exp(0.5 * enc.logvar.data()[i]) * eps_rng->normal();
  return z;
}

}  // namespace genfeat
