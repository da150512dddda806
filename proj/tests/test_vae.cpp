#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "genfeat/checkpoint.hpp"
#include "genfeat/errors.hpp"
#include "genfeat/losses.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/vae.hpp"
#include "helpers.hpp"

using namespace genfeat;

namespace {

VaeConfig tiny_cfg() {
  VaeConfig c;
  c.seq_len = 4;
  c.input_dim = 6;
  c.hidden = 5;
  c.latent = 3;
  return c;
}

Tensor random_doc(Rng& rng, const VaeConfig& c) {
  Tensor t({c.seq_len, c.input_dim});
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("vae produces full-size latent and reconstruction shapes") {
  VaeConfig c;  // defaults: 200 x 128, hidden 64, latent 32
  VaeModel m = vae_init(c, 7);
  Tensor x({200, 128});
  Rng rng(11);
  for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = 0.1 * rng.normal();

  LatentGaussian g = vae_encode(m, x);
  CHECK(g.mu.shape() == std::vector<std::size_t>{200, 32});
  CHECK(g.logvar.shape() == std::vector<std::size_t>{200, 32});

  Tensor recon = vae_decode(m, g.mu);
  CHECK(recon.shape() == std::vector<std::size_t>{200, 128});

  Tensor feats = extract_features_vae(m, x, nullptr);
  CHECK(feats.shape() == std::vector<std::size_t>{200, 32});
  for (std::size_t i = 0; i < feats.numel(); ++i) CHECK(feats.data()[i] == g.mu.data()[i]);
}

TEST_CASE("vae initialization is reproducible and seed-sensitive") {
  VaeConfig c = tiny_cfg();
  VaeModel a = vae_init(c, 42);
  VaeModel b = vae_init(c, 42);
  VaeModel d = vae_init(c, 43);

  REQUIRE(a.params.names() == b.params.names());
  bool all_equal = true;
  bool any_differs_from_d = false;
  for (const std::string& name : a.params.names()) {
    const Tensor& ta = a.params.param(name).value();
    const Tensor& tb = b.params.param(name).value();
    REQUIRE(ta.numel() == tb.numel());
    for (std::size_t i = 0; i < ta.numel(); ++i)
      if (ta.data()[i] != tb.data()[i]) all_equal = false;
    const Tensor& td = d.params.param(name).value();
    for (std::size_t i = 0; i < ta.numel(); ++i)
      if (ta.data()[i] != td.data()[i]) any_differs_from_d = true;
  }
  CHECK(all_equal);
  CHECK(any_differs_from_d);
}

TEST_CASE("reparameterize matches hand-computed values") {
  // sigma = exp(logvar/2); with logvar = 2*ln(3) sigma is exactly 3.
  Tensor mu({2, 2}, {1.0, -2.0, 0.5, 0.0});
  Tensor logvar({2, 2}, {2.0 * std::log(3.0), 0.0, 0.0, 2.0 * std::log(2.0)});
  Tensor eps({2, 2}, {2.0, 1.0, -1.0, 0.5});
  Var z = reparameterize(Var(mu), Var(logvar), eps);
  CHECK(z.value().data()[0] == doctest::Approx(7.0));    // 1 + 3*2
  CHECK(z.value().data()[1] == doctest::Approx(-1.0));   // -2 + 1*1
  CHECK(z.value().data()[2] == doctest::Approx(-0.5));   // 0.5 + 1*(-1)
  CHECK(z.value().data()[3] == doctest::Approx(1.0));    // 0 + 2*0.5

  // eps = 0 collapses to the mean.
  Tensor eps0({2, 2});
  Var z0 = reparameterize(Var(mu), Var(logvar), eps0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(z0.value().data()[i] == mu.data()[i]);

  CHECK_THROWS_AS(reparameterize(Var(mu), Var(logvar), Tensor({3})), DataError);
}

TEST_CASE("vae loss is reconstruction error plus weighted divergence") {
  Rng rng(5);
  Tensor recon_t({2, 3});
  Tensor target({2, 3});
  Tensor mu_t({2, 2});
  Tensor lv_t({2, 2});
  for (std::size_t i = 0; i < recon_t.numel(); ++i) {
    recon_t.data()[i] = rng.normal();
    target.data()[i] = rng.normal();
  }
  for (std::size_t i = 0; i < mu_t.numel(); ++i) {
    mu_t.data()[i] = rng.normal();
    lv_t.data()[i] = 0.3 * rng.normal();
  }
  Var recon(recon_t), mu(mu_t), lv(lv_t);

  const double mse = mean_squared_error(recon, target).value().data()[0];
  const double kl = kl_gaussian(mu, lv).value().data()[0];
  for (double beta : {0.0, 0.25, 1.0, 4.0}) {
    Var total = vae_loss(recon, target, mu, lv, beta);
    CHECK(total.value().data()[0] == doctest::Approx(mse + beta * kl).epsilon(1e-12));
  }
}

TEST_CASE("vae training objective passes finite-difference gradient checks") {
  VaeConfig c = tiny_cfg();
  VaeModel m = vae_init(c, 99);
  Rng rng(3);
  Tensor x({2, c.seq_len, c.input_dim});
  for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.normal();
  Tensor eps({2, c.seq_len, c.latent});
  for (std::size_t i = 0; i < eps.numel(); ++i) eps.data()[i] = rng.normal();

  auto build = [&](ParamStore&) {
    Var xv(x);
    VaeEncoded enc = vae_encode_batch(m, xv);
    Var z = reparameterize(enc.mu, enc.logvar, eps);
    Var recon = vae_decode_batch(m, z);
    return vae_loss(recon, x, enc.mu, enc.logvar, 0.5);
  };
  GradCheckReport rep = finite_difference_check(build, m.params);
  INFO(rep.worst);
  CHECK(rep.ok());
  CHECK(rep.checked > 0);
}

TEST_CASE("vae training lowers the objective and is reproducible") {
  VaeConfig c;
  c.seq_len = 8;
  c.input_dim = 6;
  c.hidden = 8;
  c.latent = 3;
  Rng data_rng(21);
  std::vector<Tensor> docs;
  for (int i = 0; i < 32; ++i) docs.push_back(random_doc(data_rng, c));

  VaeTrainConfig tc;
  tc.epochs = 20;
  tc.batch = 8;
  tc.lr = 1e-2;
  tc.beta = 1.0;

  VaeModel m = vae_init(c, 10);
  VaeHistory h = train_vae(m, docs, tc, 77);
  REQUIRE(h.epoch_loss.size() == tc.epochs);
  CHECK(m.trained);
  CHECK(h.epoch_loss.back() < h.epoch_loss.front());
  for (double v : h.epoch_loss) CHECK(std::isfinite(v));

  VaeModel m2 = vae_init(c, 10);
  VaeHistory h2 = train_vae(m2, docs, tc, 77);
  REQUIRE(h2.epoch_loss.size() == h.epoch_loss.size());
  for (std::size_t i = 0; i < h.epoch_loss.size(); ++i)
    CHECK(h.epoch_loss[i] == h2.epoch_loss[i]);
  for (const std::string& name : m.params.names()) {
    const Tensor& ta = m.params.param(name).value();
    const Tensor& tb = m2.params.param(name).value();
    for (std::size_t i = 0; i < ta.numel(); ++i) REQUIRE(ta.data()[i] == tb.data()[i]);
  }

  VaeModel m3 = vae_init(c, 10);
  VaeHistory h3 = train_vae(m3, docs, tc, 78);
  bool differs = false;
  for (std::size_t i = 0; i < h.epoch_loss.size(); ++i)
    if (h3.epoch_loss[i] != h.epoch_loss[i]) differs = true;
  CHECK(differs);
}

TEST_CASE("kl annealing reaches the full weight after the warmup tenth") {
  // With annealing the epoch-0 objective carries no divergence term, so two
  // runs that differ only in `anneal` must part ways immediately; by the end
  // of training both use the same weight.
  VaeConfig c = tiny_cfg();
  Rng data_rng(4);
  std::vector<Tensor> docs;
  for (int i = 0; i < 8; ++i) docs.push_back(random_doc(data_rng, c));

  VaeTrainConfig flat;
  flat.epochs = 20;
  flat.batch = 8;
  flat.lr = 1e-3;
  flat.beta = 1.0;
  VaeTrainConfig annealed = flat;
  annealed.anneal = true;

  VaeModel mf = vae_init(c, 1);
  VaeModel ma = vae_init(c, 1);
  VaeHistory hf = train_vae(mf, docs, flat, 5);
  VaeHistory ha = train_vae(ma, docs, annealed, 5);
  CHECK(ha.epoch_loss[0] != hf.epoch_loss[0]);
  CHECK(ha.epoch_loss[0] < hf.epoch_loss[0]);  // missing KL term lowers epoch 0
}

TEST_CASE("feature extraction modes and untrained warning") {
  VaeConfig c = tiny_cfg();
  VaeModel m = vae_init(c, 12);
  Rng rng(9);
  Tensor x = random_doc(rng, c);

  std::string warning;
  Tensor mu_feats = extract_features_vae(m, x, nullptr, &warning);
  CHECK(!warning.empty());

  LatentGaussian g = vae_encode(m, x);
  for (std::size_t i = 0; i < mu_feats.numel(); ++i)
    CHECK(mu_feats.data()[i] == g.mu.data()[i]);

  // Sampled mode differs from the mean but stays deterministic per seed.
  Rng eps1(123), eps2(123);
  Tensor s1 = extract_features_vae(m, x, &eps1);
  Tensor s2 = extract_features_vae(m, x, &eps2);
  bool same = true, differs_from_mu = false;
  for (std::size_t i = 0; i < s1.numel(); ++i) {
    if (s1.data()[i] != s2.data()[i]) same = false;
    if (s1.data()[i] != mu_feats.data()[i]) differs_from_mu = true;
  }
  CHECK(same);
  CHECK(differs_from_mu);

  std::vector<Tensor> docs(4, x);
  VaeTrainConfig tc;
  tc.epochs = 1;
  tc.batch = 4;
  train_vae(m, docs, tc, 3);
  warning.clear();
  extract_features_vae(m, x, nullptr, &warning);
  CHECK(warning.empty());
}

TEST_CASE("vae input validation") {
  VaeConfig c = tiny_cfg();
  VaeModel m = vae_init(c, 2);
  CHECK_THROWS_AS(vae_encode(m, Tensor({3, c.input_dim})), DataError);
  CHECK_THROWS_AS(vae_decode(m, Tensor({c.seq_len, c.latent + 1})), DataError);
  CHECK_THROWS_AS(train_vae(m, {}, VaeTrainConfig{}, 1), DataError);
  std::vector<Tensor> bad{Tensor({c.seq_len, c.input_dim + 1})};
  CHECK_THROWS_AS(train_vae(m, bad, VaeTrainConfig{}, 1), DataError);
  std::vector<Tensor> ok{Tensor({c.seq_len, c.input_dim})};
  VaeTrainConfig zero;
  zero.epochs = 0;
  CHECK_THROWS_AS(train_vae(m, ok, zero, 1), DataError);
  VaeConfig degenerate = c;
  degenerate.latent = 0;
  CHECK_THROWS_AS(vae_init(degenerate, 1), DataError);
}

TEST_CASE("vae parameters survive a checkpoint round trip") {
  VaeConfig c = tiny_cfg();
  VaeModel m = vae_init(c, 31);
  Rng rng(6);
  Tensor x = random_doc(rng, c);
  std::vector<Tensor> docs(6, x);
  VaeTrainConfig tc;
  tc.epochs = 2;
  tc.batch = 3;
  train_vae(m, docs, tc, 8);
  Tensor before = extract_features_vae(m, x, nullptr);

  const std::string path = std::string("vae_ckpt_") + std::to_string(::getpid()) + ".gft";
  checkpoint_save(m.params, path);
  VaeModel fresh = vae_init(c, 999);
  fresh.params.load_values(checkpoint_load(path));
  fresh.trained = true;
  Tensor after = extract_features_vae(fresh, x, nullptr);
  std::remove(path.c_str());

  REQUIRE(after.numel() == before.numel());
  for (std::size_t i = 0; i < before.numel(); ++i) {
    // Checkpoints store 32-bit floats; compare at that precision.
    CHECK(after.data()[i] == doctest::Approx(before.data()[i]).epsilon(1e-4));
  }
}
