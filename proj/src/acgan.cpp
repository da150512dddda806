#include "genfeat/acgan.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "genfeat/errors.hpp"
#include "genfeat/layers.hpp"
#include "genfeat/losses.hpp"

namespace genfeat {

namespace {

void check_cfg(const AcganConfig& c) {
  if (c.latent == 0 || c.classes == 0 || c.label_dim == 0 || c.seq_len == 0 ||
      c.emb_dim == 0 || c.gen_ch == 0 || c.g_ch1 == 0 || c.d_ch1 == 0 || c.d_ch2 == 0 ||
      c.d_ch3 == 0 || c.d_ch4 == 0)
    throw DataError("acgan: every dimension must be positive");
  if (c.seq_len % 4 != 0)
    throw DataError("acgan: sequence length must be divisible by 4, got " +
                    std::to_string(c.seq_len));
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0))
    throw DataError("acgan: dropout rate must lie in [0,1)");
}

void check_label(int label, std::size_t classes, const char* what) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes)
    throw DataError(std::string(what) + ": label " + std::to_string(label) +
                    " outside [0," + std::to_string(classes) + ")");
}

Var gen_impl(AcganModel& m, const Var& z, const std::vector<int>& labels, Rng& rng) {
  const AcganConfig& c = m.cfg;
  if (z.shape().size() != 2 || z.shape()[1] != c.latent)
    throw DataError("acgan generator: noise must be [N," + std::to_string(c.latent) + "]");
  const std::size_t n = z.shape()[0];
  if (labels.size() != n)
    throw DataError("acgan generator: need one label per noise row");
  for (int l : labels) check_label(l, c.classes, "acgan generator");
  const std::size_t base_t = c.seq_len / 4;

  Var zh = dense(m.params, "acgan/g/proj", z, c.latent, base_t * c.gen_ch,
                 Activation::LeakyRelu, rng, InitKind::Normal02);
  Var z_map = reshape(zh, {n * base_t, c.gen_ch});

  Var emb = embedding_lookup(m.params, "acgan/g/label_emb", labels, c.classes, c.label_dim,
                             rng, InitKind::Normal02);
  Var lh = dense(m.params, "acgan/g/label_proj", emb, c.label_dim, base_t,
                 Activation::Linear, rng, InitKind::Normal02);
  Var l_map = reshape(lh, {n * base_t, 1});

  Var cat = reshape(concat_cols({z_map, l_map}), {n, base_t, c.gen_ch + 1});
  Var up1 = conv1d_transpose(m.params, "acgan/g/up1", cat, c.gen_ch + 1, c.g_ch1, c.kernel,
                             Activation::LeakyRelu, rng, InitKind::Normal02);
  return conv1d_transpose(m.params, "acgan/g/up2", up1, c.g_ch1, c.emb_dim, c.kernel,
                          Activation::Linear, rng, InitKind::Normal02);
}

DiscOut disc_impl(AcganModel& m, const Var& x, Mode mode, Rng& init_rng, Rng& dropout_rng) {
  const AcganConfig& c = m.cfg;
  if (x.shape().size() != 3 || x.shape()[1] != c.seq_len || x.shape()[2] != c.emb_dim)
    throw DataError("acgan discriminator: input must be [N," + std::to_string(c.seq_len) +
                    "," + std::to_string(c.emb_dim) + "]");
  const std::size_t n = x.shape()[0];

  Var s1 = conv1d(m.params, "acgan/d/c1", x, c.emb_dim, c.d_ch1, c.kernel, 1,
                  Activation::LeakyRelu, init_rng, InitKind::Normal02);
  s1 = dropout(s1, c.dropout_rate, mode, dropout_rng);

  Var s2 = conv1d(m.params, "acgan/d/c2", s1, c.d_ch1, c.d_ch2, c.kernel, 1,
                  Activation::Linear, init_rng, InitKind::Normal02);
  s2 = batch_norm1d(m.params, "acgan/d/bn2", s2, c.d_ch2, mode);
  s2 = leaky_relu(s2);
  DiscOut out;
  out.tap = s2;
  s2 = dropout(s2, c.dropout_rate, mode, dropout_rng);

  Var s3 = conv1d(m.params, "acgan/d/c3", s2, c.d_ch2, c.d_ch3, c.kernel, 2,
                  Activation::Linear, init_rng, InitKind::Normal02);
  s3 = batch_norm1d(m.params, "acgan/d/bn3", s3, c.d_ch3, mode);
  s3 = leaky_relu(s3);
  s3 = dropout(s3, c.dropout_rate, mode, dropout_rng);

  Var s4 = conv1d(m.params, "acgan/d/c4", s3, c.d_ch3, c.d_ch4, c.kernel, 2,
                  Activation::Linear, init_rng, InitKind::Normal02);
  s4 = batch_norm1d(m.params, "acgan/d/bn4", s4, c.d_ch4, mode);
  s4 = leaky_relu(s4);
  s4 = dropout(s4, c.dropout_rate, mode, dropout_rng);

  const std::size_t flat_dim = (c.seq_len / 4) * c.d_ch4;
  Var flat = reshape(s4, {n, flat_dim});
  out.realness = dense(m.params, "acgan/d/real", flat, flat_dim, 1, Activation::Sigmoid,
                       init_rng, InitKind::Normal02);
  out.class_probs = dense(m.params, "acgan/d/cls", flat, flat_dim, c.classes,
                          Activation::Softmax, init_rng, InitKind::Normal02);
  return out;
}

Tensor draw_normal(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i)
    t.data()[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  return t;
}

void check_doc(const Tensor& d, const AcganConfig& c, const char* what) {
  if (d.shape() != std::vector<std::size_t>{c.seq_len, c.emb_dim})
    throw DataError(std::string(what) + ": expected document shape [" +
                    std::to_string(c.seq_len) + "," + std::to_string(c.emb_dim) + "]");
}

}  // namespace

AcganModel acgan_init(const AcganConfig& cfg, std::uint64_t seed) {
  check_cfg(cfg);
  AcganModel m;
  m.cfg = cfg;
  // One throwaway forward per sub-network materializes all parameters in a
  // fixed order: generator first, then discriminator.
  Rng rng(stage_seed(seed, "acgan/init"));
  Rng scratch(0);
  gen_impl(m, Var(Tensor({1, cfg.latent})), {0}, rng);
  disc_impl(m, Var(Tensor({1, cfg.seq_len, cfg.emb_dim})), Mode::Infer, rng, scratch);
  return m;
}

Var generator_forward_batch(AcganModel& model, const Var& z, const std::vector<int>& labels) {
  Rng scratch(0);  // parameters already exist; never consumed
  return gen_impl(model, z, labels, scratch);
}

DiscOut discriminator_forward_batch(AcganModel& model, const Var& x, Mode mode,
                                    Rng& dropout_rng) {
  Rng scratch(0);
  return disc_impl(model, x, mode, scratch, dropout_rng);
}

Tensor acgan_generate(AcganModel& model, const Tensor& z, int label) {
  const AcganConfig& c = model.cfg;
  if (z.shape() != std::vector<std::size_t>{c.latent})
    throw DataError("acgan_generate: noise must be [" + std::to_string(c.latent) + "]");
  check_label(label, c.classes, "acgan_generate");
  Tensor batched({1, c.latent}, std::vector<real>(z.data(), z.data() + z.numel()));
  Var seq = generator_forward_batch(model, Var(std::move(batched)), {label});
  // [1,T,E] -> channels-first [E,T].
  Tensor out({c.emb_dim, c.seq_len});
  const real* src = seq.value().data();
  for (std::size_t t = 0; t < c.seq_len; ++t)
    for (std::size_t e = 0; e < c.emb_dim; ++e)
      out.data()[e * c.seq_len + t] = src[t * c.emb_dim + e];
  return out;
}

Tensor acgan_tap(AcganModel& model, const Tensor& x) {
  const AcganConfig& c = model.cfg;
  check_doc(x, c, "acgan_tap");
  Tensor batched({1, c.seq_len, c.emb_dim}, std::vector<real>(x.data(), x.data() + x.numel()));
  Rng scratch(0);
  DiscOut d = discriminator_forward_batch(model, Var(std::move(batched)), Mode::Infer, scratch);
  Tensor out({c.d_ch2, c.seq_len});
  const real* src = d.tap.value().data();
  for (std::size_t t = 0; t < c.seq_len; ++t)
    for (std::size_t ch = 0; ch < c.d_ch2; ++ch)
      out.data()[ch * c.seq_len + t] = src[t * c.d_ch2 + ch];
  return out;
}

Tensor extract_features_acgan(AcganModel& model, const Tensor& x, std::string* warning) {
  if (!model.trained && warning)
    *warning = "extracting features from an untrained adversarial model";
  const AcganConfig& c = model.cfg;
  check_doc(x, c, "extract_features_acgan");
  Tensor batched({1, c.seq_len, c.emb_dim}, std::vector<real>(x.data(), x.data() + x.numel()));
  Rng scratch(0);
  DiscOut d = discriminator_forward_batch(model, Var(std::move(batched)), Mode::Infer, scratch);
  const Tensor& tap = d.tap.value();
  return Tensor({c.seq_len, c.d_ch2},
                std::vector<real>(tap.data(), tap.data() + tap.numel()));
}

AcganHistory train_acgan(AcganModel& model, const std::vector<Tensor>& docs,
                         const std::vector<int>& labels, const AcganTrainConfig& tc,
                         std::uint64_t seed, const AcganObserver& observer) {
  const AcganConfig& c = model.cfg;
  if (docs.empty()) throw DataError("train_acgan: training corpus is empty");
  if (labels.size() != docs.size())
    throw DataError("train_acgan: need one label per document");
  for (int l : labels) check_label(l, c.classes, "train_acgan");
  for (const Tensor& d : docs) check_doc(d, c, "train_acgan");
  if (tc.batch < 2 || tc.batch % 2 != 0)
    throw DataError("train_acgan: batch must be even and at least 2");
  if (tc.epochs == 0) throw DataError("train_acgan: epochs must be positive");
  if (!(tc.lr > 0.0)) throw DataError("train_acgan: learning rate must be positive");

  Rng shuffle_rng(stage_seed(seed, "acgan/shuffle"));
  Rng z_rng(stage_seed(seed, "acgan/z"));
  Rng label_rng(stage_seed(seed, "acgan/labels"));
  Rng drop_rng(stage_seed(seed, "acgan/dropout"));

  const std::size_t n_real = tc.batch / 2;
  const std::size_t n_fake = tc.batch - n_real;
  const std::size_t doc_elems = c.seq_len * c.emb_dim;
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle before the first draw
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, docs.size() / n_real);

  AcganHistory hist;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      // Discriminator phase: real rows first, then detached generated rows.
      std::vector<int> real_labels(n_real);
      Tensor combined({tc.batch, c.seq_len, c.emb_dim});
      for (std::size_t i = 0; i < n_real; ++i) {
        if (cursor == order.size()) {
          shuffle_rng.shuffle(order);
          cursor = 0;
        }
        const std::size_t idx = order[cursor++];
        real_labels[i] = labels[idx];
        std::copy(docs[idx].data(), docs[idx].data() + doc_elems,
                  combined.data() + i * doc_elems);
      }
      std::vector<int> fake_labels(n_fake);
      for (std::size_t i = 0; i < n_fake; ++i)
        fake_labels[i] = static_cast<int>(label_rng.index(c.classes));
      Var fake = generator_forward_batch(model, Var(draw_normal(z_rng, {n_fake, c.latent})),
                                         fake_labels);
      std::copy(fake.value().data(), fake.value().data() + n_fake * doc_elems,
                combined.data() + n_real * doc_elems);

      Tensor real_target({tc.batch, 1});
      for (std::size_t i = 0; i < n_real; ++i) real_target.data()[i] = 1.0;
      std::vector<int> all_labels = real_labels;
      all_labels.insert(all_labels.end(), fake_labels.begin(), fake_labels.end());

      DiscOut d = discriminator_forward_batch(model, Var(std::move(combined)), Mode::Train,
                                              drop_rng);
      Var d_loss = add(binary_cross_entropy(d.realness, real_target),
                       categorical_cross_entropy(d.class_probs, one_hot(all_labels, c.classes)));
      auto d_grads = filter_grads(gradients(d_loss, model.params), "acgan/d/");
      adam_step(model.params, d_grads, tc.lr, tc.beta1);
      hist.d_loss.push_back(d_loss.value().data()[0]);
      if (observer) observer({epoch, step, 0, hist.d_loss.back()});

      // Generator phase through the frozen discriminator (inference mode, so
      // its running statistics stay untouched).
      std::vector<int> gen_labels(tc.batch);
      for (std::size_t i = 0; i < tc.batch; ++i)
        gen_labels[i] = static_cast<int>(label_rng.index(c.classes));
      Var gen = generator_forward_batch(model, Var(draw_normal(z_rng, {tc.batch, c.latent})),
                                        gen_labels);
      DiscOut dg = discriminator_forward_batch(model, gen, Mode::Infer, drop_rng);
      Tensor want_real({tc.batch, 1});
      for (std::size_t i = 0; i < tc.batch; ++i) want_real.data()[i] = 1.0;
      Var g_loss = add(binary_cross_entropy(dg.realness, want_real),
                       categorical_cross_entropy(dg.class_probs, one_hot(gen_labels, c.classes)));
      auto g_grads = filter_grads(gradients(g_loss, model.params), "acgan/g/");
      adam_step(model.params, g_grads, tc.lr, tc.beta1);
      hist.g_loss.push_back(g_loss.value().data()[0]);
      if (observer) observer({epoch, step, 1, hist.g_loss.back()});
    }
  }
  model.trained = true;
  return hist;
}

}  // namespace genfeat
