#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "genfeat/aae.hpp"
#include "genfeat/errors.hpp"
#include "genfeat/losses.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/vae.hpp"
#include "helpers.hpp"

using namespace genfeat;

namespace {

AaeConfig tiny_cfg() {
  AaeConfig c;
  c.seq_len = 4;
  c.input_dim = 5;
  c.hidden = 6;
  c.latent = 3;
  return c;
}

Tensor random_doc01(Rng& rng, const AaeConfig& c) {
  Tensor t({c.seq_len, c.input_dim});
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(0.05, 0.95);
  return t;
}

std::map<std::string, Tensor> snapshot_prefix(const ParamStore& params,
                                              const std::string& prefix) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, value] : params.snapshot())
    if (name.rfind(prefix, 0) == 0) out.emplace(name, value);
  return out;
}

bool bit_identical(const std::map<std::string, Tensor>& a,
                   const std::map<std::string, Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.numel() != ta.numel()) return false;
    for (std::size_t i = 0; i < ta.numel(); ++i)
      if (ta.data()[i] != it->second.data()[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adversarial autoencoder shapes and bounded reconstruction") {
  AaeConfig c;  // paper-scale defaults: 200 x 128, latent 32
  AaeModel m = aae_init(c, 5);
  Rng rng(2);
  Tensor x({200, 128});
  for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.uniform(0.0, 1.0);

  AaeLatent g = aae_encode(m, x);
  CHECK(g.mu.shape() == std::vector<std::size_t>{200, 32});
  CHECK(g.logvar.shape() == std::vector<std::size_t>{200, 32});

  Tensor recon = aae_decode(m, g.mu);
  CHECK(recon.shape() == std::vector<std::size_t>{200, 128});
  for (std::size_t i = 0; i < recon.numel(); ++i) {
    CHECK(recon.data()[i] > 0.0);
    CHECK(recon.data()[i] < 1.0);
  }

  Tensor feats = extract_features_aae(m, x, nullptr);
  CHECK(feats.shape() == std::vector<std::size_t>{200, 32});
  for (std::size_t i = 0; i < feats.numel(); ++i) CHECK(feats.data()[i] == g.mu.data()[i]);
}

TEST_CASE("latent critic scores rows independently") {
  AaeConfig c = tiny_cfg();
  AaeModel m = aae_init(c, 7);
  Rng rng(3);
  Tensor codes({5, c.latent});
  for (std::size_t i = 0; i < codes.numel(); ++i) codes.data()[i] = rng.normal();

  Var all = aae_discriminate(m, Var(codes));
  CHECK(all.shape() == std::vector<std::size_t>{5, 1});
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(all.value().data()[i] > 0.0);
    CHECK(all.value().data()[i] < 1.0);
  }

  // Scoring one row alone gives the same value: no cross-row coupling.
  for (std::size_t r = 0; r < 5; ++r) {
    Tensor one({1, c.latent},
               std::vector<real>(codes.data() + r * c.latent, codes.data() + (r + 1) * c.latent));
    Var s = aae_discriminate(m, Var(std::move(one)));
    CHECK(s.value().data()[0] == doctest::Approx(all.value().data()[r]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(aae_discriminate(m, Var(Tensor({5, c.latent + 1}))), DataError);
}

TEST_CASE("reconstruction objective passes finite-difference gradient checks") {
  AaeConfig c = tiny_cfg();
  AaeModel m = aae_init(c, 11);
  Rng rng(4);
  testutil::randomize_params(m.params, rng);
  Tensor x({2, c.seq_len, c.input_dim});
  for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.uniform(0.05, 0.95);
  Tensor eps({2, c.seq_len, c.latent});
  for (std::size_t i = 0; i < eps.numel(); ++i) eps.data()[i] = rng.normal();

  auto build = [&](ParamStore&) {
    AaeEncoded enc = aae_encode_batch(m, Var(x));
    Var z = reparameterize(enc.mu, enc.logvar, eps);
    Var recon = aae_decode_batch(m, z);
    return mean_squared_error(recon, x);
  };
  GradCheckReport rep = finite_difference_check(build, m.params);
  INFO(rep.worst);
  CHECK(rep.ok());
}

TEST_CASE("critic and fooling objectives pass finite-difference gradient checks") {
  AaeConfig c = tiny_cfg();
  AaeModel m = aae_init(c, 13);
  Rng rng(6);
  testutil::randomize_params(m.params, rng);

  SUBCASE("critic on fixed codes") {
    Tensor codes({6, c.latent});
    for (std::size_t i = 0; i < codes.numel(); ++i) codes.data()[i] = rng.normal();
    Tensor target({6, 1}, {0, 0, 0, 1, 1, 1});
    auto build = [&](ParamStore&) {
      return binary_cross_entropy(aae_discriminate(m, Var(codes)), target);
    };
    GradCheckReport rep = finite_difference_check(build, m.params);
    INFO(rep.worst);
    CHECK(rep.ok());
  }

  SUBCASE("encoder through the frozen critic") {
    Tensor x({2, c.seq_len, c.input_dim});
    for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.uniform(0.05, 0.95);
    Tensor eps({2, c.seq_len, c.latent});
    for (std::size_t i = 0; i < eps.numel(); ++i) eps.data()[i] = rng.normal();
    Tensor want_real({2 * c.seq_len, 1});
    for (std::size_t i = 0; i < want_real.numel(); ++i) want_real.data()[i] = 1.0;
    auto build = [&](ParamStore&) {
      AaeEncoded enc = aae_encode_batch(m, Var(x));
      Var z = reparameterize(enc.mu, enc.logvar, eps);
      Var rows = reshape(z, {2 * c.seq_len, c.latent});
      return binary_cross_entropy(aae_discriminate(m, rows), want_real);
    };
    GradCheckReport rep = finite_difference_check(build, m.params);
    INFO(rep.worst);
    CHECK(rep.ok());
  }
}

TEST_CASE("three training phases each update only their own sub-network") {
  AaeConfig c = tiny_cfg();
  AaeModel m = aae_init(c, 17);
  Rng rng(8);
  std::vector<Tensor> docs;
  for (int i = 0; i < 8; ++i) docs.push_back(random_doc01(rng, c));

  AaeTrainConfig tc;
  tc.epochs = 3;
  tc.batch = 4;
  tc.n_real = 2;
  tc.n_fake = 2;

  std::map<std::string, Tensor> enc_prev = snapshot_prefix(m.params, "aae/enc/");
  std::map<std::string, Tensor> dec_prev = snapshot_prefix(m.params, "aae/dec/");
  std::map<std::string, Tensor> disc_after_p0, dec_after_p1;
  bool ae_frozen_in_p0 = true, disc_frozen_in_p1 = true, disc_frozen_in_p2 = true,
       dec_frozen_in_p2 = true;
  std::size_t full_cycles = 0;
  auto observer = [&](const AaeStepInfo& info) {
    if (info.phase == 0) {
      if (!bit_identical(snapshot_prefix(m.params, "aae/enc/"), enc_prev) ||
          !bit_identical(snapshot_prefix(m.params, "aae/dec/"), dec_prev))
        ae_frozen_in_p0 = false;
      disc_after_p0 = snapshot_prefix(m.params, "aae/disc/");
    } else if (info.phase == 1) {
      if (!bit_identical(snapshot_prefix(m.params, "aae/disc/"), disc_after_p0))
        disc_frozen_in_p1 = false;
      dec_after_p1 = snapshot_prefix(m.params, "aae/dec/");
    } else {
      if (!bit_identical(snapshot_prefix(m.params, "aae/disc/"), disc_after_p0))
        disc_frozen_in_p2 = false;
      if (!bit_identical(snapshot_prefix(m.params, "aae/dec/"), dec_after_p1))
        dec_frozen_in_p2 = false;
      enc_prev = snapshot_prefix(m.params, "aae/enc/");
      dec_prev = snapshot_prefix(m.params, "aae/dec/");
      ++full_cycles;
    }
  };

  AaeHistory hist = train_aae(m, docs, tc, 55, observer);
  CHECK(full_cycles == hist.fool_loss.size());
  CHECK(ae_frozen_in_p0);
  CHECK(disc_frozen_in_p1);
  CHECK(disc_frozen_in_p2);
  CHECK(dec_frozen_in_p2);
  CHECK(hist.disc_loss.size() == hist.recon_loss.size());
  CHECK(hist.recon_loss.size() == hist.fool_loss.size());
}

TEST_CASE("adversarial autoencoder training lowers reconstruction error") {
  // Smooth, repetitive documents the recurrent stack can actually compress;
  // the adversarial phases keep tugging the codes toward the prior, so the
  // decrease is judged on first-five/last-five averages.
  AaeConfig c;
  c.seq_len = 6;
  c.input_dim = 5;
  c.hidden = 8;
  c.latent = 3;
  AaeModel m = aae_init(c, 7);
  Rng rng(9);
  std::vector<Tensor> docs;
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor t({c.seq_len, c.input_dim});
    for (std::size_t p = 0; p < c.seq_len; ++p)
      for (std::size_t d = 0; d < c.input_dim; ++d)
        t.data()[p * c.input_dim + d] =
            std::clamp(0.1 + 0.8 * ((p + d + i) % 5) / 4.0 + 0.02 * rng.normal(), 0.05, 0.95);
    docs.push_back(t);
  }

  AaeTrainConfig tc;
  tc.epochs = 400;
  tc.batch = 4;
  tc.n_real = 2;
  tc.n_fake = 2;

  AaeHistory hist = train_aae(m, docs, tc, 3);
  REQUIRE(hist.recon_loss.size() == tc.epochs);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 5; ++i) {
    first += hist.recon_loss[i];
    last += hist.recon_loss[hist.recon_loss.size() - 1 - i];
  }
  CHECK(last < first);
  for (double v : hist.disc_loss) CHECK(std::isfinite(v));
  for (double v : hist.recon_loss) CHECK(std::isfinite(v));
  for (double v : hist.fool_loss) CHECK(std::isfinite(v));
  CHECK(m.trained);
}

TEST_CASE("adversarial autoencoder training is reproducible per seed") {
  AaeConfig c = tiny_cfg();
  c.seq_len = 6;
  Rng rng(9);
  std::vector<Tensor> docs;
  for (int i = 0; i < 8; ++i) docs.push_back(random_doc01(rng, c));

  AaeTrainConfig tc;
  tc.epochs = 30;
  tc.batch = 4;
  tc.n_real = 2;
  tc.n_fake = 2;

  AaeModel m = aae_init(c, 19);
  AaeHistory hist = train_aae(m, docs, tc, 23);
  AaeModel m2 = aae_init(c, 19);
  AaeHistory h2 = train_aae(m2, docs, tc, 23);
  const std::size_t steps = tc.epochs * (docs.size() / tc.batch);
  REQUIRE(hist.recon_loss.size() == steps);
  for (std::size_t i = 0; i < steps; ++i) {
    REQUIRE(hist.disc_loss[i] == h2.disc_loss[i]);
    REQUIRE(hist.recon_loss[i] == h2.recon_loss[i]);
    REQUIRE(hist.fool_loss[i] == h2.fool_loss[i]);
  }
  for (const std::string& name : m.params.names()) {
    const Tensor& ta = m.params.param(name).value();
    const Tensor& tb = m2.params.param(name).value();
    for (std::size_t i = 0; i < ta.numel(); ++i) REQUIRE(ta.data()[i] == tb.data()[i]);
  }

  AaeModel m3 = aae_init(c, 19);
  AaeHistory h3 = train_aae(m3, docs, tc, 24);
  bool differs = false;
  for (std::size_t i = 0; i < steps; ++i)
    if (h3.recon_loss[i] != hist.recon_loss[i]) differs = true;
  CHECK(differs);
}

TEST_CASE("adversarial autoencoder feature extraction modes and warnings") {
  AaeConfig c = tiny_cfg();
  AaeModel m = aae_init(c, 29);
  Rng rng(10);
  Tensor x = random_doc01(rng, c);

  std::string warning;
  Tensor mu_feats = extract_features_aae(m, x, nullptr, &warning);
  CHECK(!warning.empty());
  AaeLatent g = aae_encode(m, x);
  for (std::size_t i = 0; i < mu_feats.numel(); ++i)
    CHECK(mu_feats.data()[i] == g.mu.data()[i]);

  Rng eps1(42), eps2(42);
  Tensor s1 = extract_features_aae(m, x, &eps1);
  Tensor s2 = extract_features_aae(m, x, &eps2);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < s1.numel(); ++i) {
    if (s1.data()[i] != s2.data()[i]) same = false;
    if (s1.data()[i] != mu_feats.data()[i]) differs = true;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("adversarial autoencoder validates configs and inputs") {
  AaeConfig c = tiny_cfg();
  AaeModel m = aae_init(c, 1);
  CHECK_THROWS_AS(aae_encode(m, Tensor({c.seq_len + 1, c.input_dim})), DataError);
  CHECK_THROWS_AS(aae_decode(m, Tensor({c.seq_len, c.latent + 1})), DataError);
  CHECK_THROWS_AS(train_aae(m, {}, AaeTrainConfig{}, 1), DataError);

  std::vector<Tensor> docs{Tensor({c.seq_len, c.input_dim}),
                           Tensor({c.seq_len, c.input_dim})};
  AaeTrainConfig tc;
  tc.batch = 2;
  tc.n_real = 2;
  tc.n_fake = 1;  // 2 + 1 > 2
  CHECK_THROWS_AS(train_aae(m, docs, tc, 1), DataError);
  tc.n_real = 0;
  tc.n_fake = 1;
  CHECK_THROWS_AS(train_aae(m, docs, tc, 1), DataError);

  AaeConfig degenerate = c;
  degenerate.hidden = 0;
  CHECK_THROWS_AS(aae_init(degenerate, 1), DataError);
}
