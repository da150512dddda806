#include <cstdio>
#include <map>
#include <string>

#include "doctest.h"
#include "genfeat/errors.hpp"
#include "genfeat/fileio.hpp"
#include "genfeat/preprocess.hpp"
#include "genfeat/runconfig.hpp"

using namespace genfeat;

namespace {

RunConfig from_text(const std::string& text,
                    std::map<std::string, std::string> overrides = {}) {
  return make_run_config(parse_config_text(text), std::move(overrides));
}

}  // namespace

TEST_CASE("config text parses comments, blanks, and later-key-wins") {
  const std::string text =
      "# pipeline settings\n"
      "\n"
      "seed = 9\n"
      "emb_dim = 16   # trailing comment\n"
      "seed = 11\n";
  auto kv = parse_config_text(text);
  CHECK(kv.size() == 2);
  CHECK(kv.at("seed") == "11");
  CHECK(kv.at("emb_dim") == "16");
}

TEST_CASE("malformed config lines name the line number") {
  CHECK_THROWS_WITH_AS(parse_config_text("seed = 1\nnot a pair\n"),
                       doctest::Contains("line 2"), UsageError);
  CHECK_THROWS_WITH_AS(parse_config_text("= 5\n"), doctest::Contains("line 1"),
                       UsageError);
}

TEST_CASE("defaults survive an empty configuration") {
  RunConfig cfg = from_text("");
  CHECK(cfg.seed == 42);
  CHECK(cfg.seq_len == 200);
  CHECK(cfg.emb_dim == 128);
  CHECK(cfg.feature_dim == 32);
  CHECK(cfg.vocab_cap == 50000);
  CHECK(cfg.train_frac == doctest::Approx(0.8));
  CHECK(cfg.extractor == ExtractorKind::None);
  CHECK(cfg.classifier == ClassifierKind::Cnn);
  CHECK(!cfg.epochs.has_value());
  CHECK(!cfg.lr.has_value());
  CHECK(cfg.patience == 10);
  CHECK(cfg.weighted);
  CHECK(cfg.enforce_ranges);
  CHECK(!cfg.deterministic);
  CHECK(cfg.gan_latent == 100);
  CHECK(cfg.conv_filters == std::vector<std::size_t>{128, 128, 256, 256});
  CHECK(cfg.conv_kernels == std::vector<std::size_t>{5, 5, 3, 3});
  CHECK(cfg.lstm_units == std::vector<std::size_t>{128, 128, 64, 64});
}

TEST_CASE("file values land in the typed fields") {
  RunConfig cfg = from_text(
      "seed = 7\n"
      "extractor = aae\n"
      "classifier = bilstm-attn\n"
      "deterministic = yes\n"
      "weighted = no\n"
      "epochs = 12\n"
      "lr = 0.5\n"
      "beta = 2.0\n"
      "anneal = true\n"
      "conv_filters = 8,8,16,16\n"
      "corpus = a.jsonl\n"
      "alpha = 0.01\n");
  CHECK(cfg.seed == 7);
  CHECK(cfg.extractor == ExtractorKind::Aae);
  CHECK(cfg.classifier == ClassifierKind::BilstmAttention);
  CHECK(cfg.deterministic);
  CHECK(!cfg.weighted);
  CHECK(cfg.epochs.value() == 12);
  CHECK(cfg.lr.value() == doctest::Approx(0.5));
  CHECK(cfg.beta == doctest::Approx(2.0));
  CHECK(cfg.anneal);
  CHECK(cfg.conv_filters == std::vector<std::size_t>{8, 8, 16, 16});
  CHECK(cfg.corpus == "a.jsonl");
  CHECK(cfg.alpha == doctest::Approx(0.01));
}

TEST_CASE("overrides beat file values") {
  RunConfig cfg = from_text("seed = 5\nextractor = vae\n",
                            {{"seed", "99"}, {"extractor", "pca"}});
  CHECK(cfg.seed == 99);
  CHECK(cfg.extractor == ExtractorKind::Pca);
}

TEST_CASE("unknown keys suggest the nearest known key") {
  CHECK_THROWS_WITH_AS(from_text("batchsize = 9\n"),
                       doctest::Contains("did you mean \"batch_size\""), UsageError);
  CHECK_THROWS_WITH_AS(from_text("sed = 9\n"), doctest::Contains("did you mean \"seed\""),
                       UsageError);
  // Nothing within edit distance three: no suggestion offered.
  try {
    from_text("zzzzzzzzzz = 9\n");
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("did you mean") == std::string::npos);
    CHECK(std::string(e.what()).find("zzzzzzzzzz") != std::string::npos);
  }
}

TEST_CASE("values must parse as their field types") {
  CHECK_THROWS_AS(from_text("seed = -3\n"), UsageError);
  CHECK_THROWS_AS(from_text("seed = 1x\n"), UsageError);
  CHECK_THROWS_AS(from_text("lr = fast\n"), UsageError);
  CHECK_THROWS_AS(from_text("lr = -1\n"), UsageError);
  CHECK_THROWS_AS(from_text("deterministic = maybe\n"), UsageError);
  CHECK_THROWS_AS(from_text("conv_filters = 8,,8\n"), UsageError);
  CHECK_THROWS_AS(from_text("extractor = gru\n"), UsageError);
  CHECK_THROWS_AS(from_text("classifier = mlp\n"), UsageError);
  CHECK_THROWS_AS(from_text("dropout = 1.0\n"), UsageError);
  CHECK_THROWS_AS(from_text("alpha = 0\n"), UsageError);
  CHECK_THROWS_AS(from_text("vocab_cap = 1\n"), UsageError);
}

TEST_CASE("fractions must sum to one") {
  CHECK_THROWS_WITH_AS(from_text("train_frac = 0.5\n"), doctest::Contains("sum to 1"),
                       UsageError);
  RunConfig cfg = from_text("train_frac = 0.6\nval_frac = 0.2\ntest_frac = 0.2\n");
  CHECK(cfg.train_frac == doctest::Approx(0.6));
}

TEST_CASE("extractor and classifier names round-trip") {
  for (ExtractorKind k : {ExtractorKind::None, ExtractorKind::Vae, ExtractorKind::Acgan,
                          ExtractorKind::Aae, ExtractorKind::Pca})
    CHECK(parse_extractor(extractor_name(k)) == k);
  for (ClassifierKind k : {ClassifierKind::Lstm, ClassifierKind::Bilstm,
                           ClassifierKind::BilstmAttention, ClassifierKind::Cnn,
                           ClassifierKind::Clstm})
    CHECK(parse_classifier_name(classifier_name(k)) == k);
  CHECK_THROWS_AS(parse_extractor("bert"), UsageError);
  CHECK_THROWS_AS(parse_classifier_name("bilstm_attn"), UsageError);
}

TEST_CASE("fingerprint is stable for equal configs and moves when a field moves") {
  RunConfig a = from_text("seed = 3\nlatent = 16\n");
  RunConfig b = from_text("latent = 16\n# order and comments are irrelevant\nseed = 3\n");
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 16);

  RunConfig c = from_text("seed = 4\nlatent = 16\n");
  CHECK(config_fingerprint(a) != config_fingerprint(c));

  // Unset optionals and explicit defaults render differently on purpose: the
  // canonical text records what was requested, not what will be resolved.
  const std::string canon = config_canonical_text(a);
  CHECK(canon.find("seed=3") != std::string::npos);
  CHECK(canon.find("epochs=default") != std::string::npos);
}

TEST_CASE("every known key is accepted end to end") {
  std::string text;
  for (const std::string& key : config_keys()) {
    if (key == "extractor") text += "extractor = vae\n";
    else if (key == "classifier") text += "classifier = cnn\n";
    else if (key == "anneal" || key == "deterministic" || key == "weighted" ||
             key == "enforce_ranges")
      text += key + " = true\n";
    else if (key == "conv_filters" || key == "conv_kernels" || key == "lstm_units")
      text += key + " = 4,4,4,4\n";
    else if (key == "train_frac") text += "train_frac = 0.8\n";
    else if (key == "val_frac") text += "val_frac = 0.1\n";
    else if (key == "test_frac") text += "test_frac = 0.1\n";
    else if (key == "alpha") text += "alpha = 0.05\n";
    else if (key == "dropout") text += "dropout = 0.3\n";
    else if (key == "lr") text += "lr = 0.001\n";
    else if (key == "beta" || key == "beta1") text += key + " = 0.5\n";
    else if (key == "corpus" || key == "stopwords" || key == "stems" || key == "vocab" ||
             key == "model" || key == "out")
      text += key + " = some/path\n";
    else text += key + " = 8\n";
  }
  RunConfig cfg = from_text(text);
  CHECK(cfg.seq_len == 8);
  CHECK(cfg.extractor == ExtractorKind::Vae);
}

TEST_CASE("vocabulary persistence round-trips and validates") {
  Vocabulary v = build_vocab({{"kite", "kite", "rain"}, {"rain", "kite", "soil"}}, 10);
  const std::string path = "/tmp/genfeat_cli_vocab_test.txt";
  vocab_save(v, path);
  Vocabulary back = vocab_load(path);
  CHECK(back.tokens == v.tokens);
  CHECK(back.index == v.index);

  write_file_atomic(path, "<pad>\n<unk>\nkite\nkite\n");
  CHECK_THROWS_WITH_AS(vocab_load(path), doctest::Contains("kite"), DataError);

  write_file_atomic(path, "kite\nrain\n");
  CHECK_THROWS_AS(vocab_load(path), DataError);
  std::remove(path.c_str());
}
