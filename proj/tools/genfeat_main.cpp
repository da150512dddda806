#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "genfeat/aae.hpp"
#include "genfeat/acgan.hpp"
#include "genfeat/baselines.hpp"
#include "genfeat/checkpoint.hpp"
#include "genfeat/classifiers.hpp"
#include "genfeat/corpus.hpp"
#include "genfeat/errors.hpp"
#include "genfeat/feature_io.hpp"
#include "genfeat/fileio.hpp"
#include "genfeat/layers.hpp"
#include "genfeat/metrics.hpp"
#include "genfeat/preprocess.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/runconfig.hpp"
#include "genfeat/stats.hpp"
#include "genfeat/vae.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace genfeat;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt_fixed(double v, int prec) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

// Tracks inputs (for provenance hashes) and created artifacts (for cleanup
// when a command fails halfway).
struct Runner {
  RunConfig cfg;
  std::string command;
  bool out_given = false;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> created;

  std::string out_path(const std::string& name) const {
    return (fs::path(cfg.out) / name).string();
  }

  void ensure_out() const {
    if (!cfg.out.empty()) fs::create_directories(cfg.out);
  }

  std::string read_input(const std::string& path) {
    std::string bytes = read_file(path);
    input_hashes[path] = hex64(fnv1a64(bytes));
    return bytes;
  }
  void note_input(const std::string& path) { (void)read_input(path); }

  void record(const std::string& path) { created.push_back(path); }

  // Provenance sidecar. No timestamps here; those live only in run.log.
  void meta_sidecar(const std::string& artifact_path) {
    json meta;
    meta["artifact"] = fs::path(artifact_path).filename().string();
    meta["command"] = command;
    meta["config"] = config_fingerprint(cfg);
    meta["inputs"] = input_hashes;
    meta["version"] = kToolVersion;
    const std::string p = artifact_path + ".meta.json";
    write_file_atomic(p, meta.dump(2) + "\n");
    record(p);
  }

  // For files written by module-level savers (corpus_save_jsonl, ...).
  void adopt(const std::string& path) {
    record(path);
    meta_sidecar(path);
  }

  void write_artifact(const std::string& name, const std::string& bytes) {
    const std::string p = out_path(name);
    write_file_atomic(p, bytes);
    adopt(p);
  }

  void log_line(const std::string& msg) {
    std::ofstream log(out_path("run.log"), std::ios::app);
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    log << stamp << " " << msg << "\n";
  }

  void cleanup() {
    for (const std::string& p : created) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

json json_load(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw DataError(what + ": not valid JSON");
  return j;
}

template <typename T>
T jget(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw DataError(what + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(what + ": field \"" + key + "\" has the wrong type");
  }
}

std::unordered_map<std::string, std::string> load_label_map(Runner& r) {
  if (r.cfg.corpus.empty())
    throw UsageError(r.command + ": config key \"corpus\" (labels source) is required");
  r.note_input(r.cfg.corpus);
  Corpus c = corpus_load_jsonl(r.cfg.corpus);
  std::unordered_map<std::string, std::string> m;
  for (const Document& d : c) m[d.id] = d.label;
  return m;
}

struct LabelSpace {
  std::vector<std::string> names;         // category-table order
  std::map<std::string, int> index;
};

LabelSpace label_space_from(const std::vector<std::string>& labels) {
  std::set<std::string> uniq(labels.begin(), labels.end());
  LabelSpace ls;
  for (const char* cat : kCategories) {
    if (uniq.count(cat)) {
      ls.index[cat] = static_cast<int>(ls.names.size());
      ls.names.push_back(cat);
    }
  }
  for (const std::string& l : uniq)
    if (!ls.index.count(l)) throw DataError("unknown category \"" + l + "\"");
  return ls;
}

std::vector<std::string> labels_of(const FeatureSet& fsx,
                                   const std::unordered_map<std::string, std::string>& id2label,
                                   const std::string& what) {
  std::vector<std::string> out;
  out.reserve(fsx.ids.size());
  for (const std::string& id : fsx.ids) {
    auto it = id2label.find(id);
    if (it == id2label.end() || it->second.empty())
      throw DataError(what + ": no label for document \"" + id + "\"");
    out.push_back(it->second);
  }
  return out;
}

std::vector<int> indices_of(const std::vector<std::string>& labels, const LabelSpace& ls,
                            const std::string& what) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const std::string& l : labels) {
    auto it = ls.index.find(l);
    if (it == ls.index.end())
      throw DataError(what + ": label \"" + l + "\" missing from the training label set");
    out.push_back(it->second);
  }
  return out;
}

std::string metrics_table_text(const std::vector<std::string>& names, const PrfReport& rep) {
  std::size_t width = 8;
  for (const std::string& n : names) width = std::max(width, n.size());
  std::ostringstream ss;
  auto pad = [&](std::string s) {
    s.resize(width + 2, ' ');
    return s;
  };
  ss << pad("class") << "precision  recall     f1\n";
  for (std::size_t c = 0; c < names.size(); ++c) {
    const Prf& p = rep.per_class[c];
    ss << pad(names[c]) << fmt_fixed(p.precision, 4) << "     " << fmt_fixed(p.recall, 4)
       << "     " << fmt_fixed(p.f1, 4) << "\n";
  }
  ss << pad("macro") << fmt_fixed(rep.macro.precision, 4) << "     "
     << fmt_fixed(rep.macro.recall, 4) << "     " << fmt_fixed(rep.macro.f1, 4) << "\n";
  ss << "accuracy " << fmt_fixed(rep.accuracy, 4) << "\n";
  return ss.str();
}

// ---------------------------------------------------------------- commands

void cmd_corpus_ingest(Runner& r, const std::string& in_csv) {
  r.ensure_out();
  r.note_input(in_csv);
  std::vector<std::string> warnings;
  Corpus c = ingest_csv(in_csv, &warnings);
  const std::size_t ingested = c.size();
  c = resolve_labels(c);
  Corpus labeled;
  std::size_t unlabeled = 0;
  for (const Document& d : c) {
    if (d.label.empty()) {
      ++unlabeled;
      warnings.push_back("dropped unlabeled document " + d.id);
    } else {
      labeled.push_back(d);
    }
  }
  const std::size_t before_dedupe = labeled.size();
  labeled = dedupe(labeled);
  const std::size_t duplicates = before_dedupe - labeled.size();
  Corpus final_corpus = split_long_documents(labeled, r.cfg.max_words, &warnings);
  if (final_corpus.empty()) throw DataError("corpus-ingest: no usable documents");

  corpus_save_jsonl(final_corpus, r.out_path("corpus.jsonl"));
  r.adopt(r.out_path("corpus.jsonl"));
  r.write_artifact("corpus_stats.txt", stats_table_text(corpus_stats(final_corpus)));
  for (const std::string& w : warnings) r.log_line("corpus-ingest: " + w);

  std::cout << "ingested " << ingested << " rows, dropped " << unlabeled
            << " unlabeled and " << duplicates << " duplicates, wrote "
            << final_corpus.size() << " documents";
  if (!warnings.empty()) std::cout << " (" << warnings.size() << " warnings in run.log)";
  std::cout << "\n";
}

void cmd_corpus_split(Runner& r, const std::string& corpus_path) {
  r.ensure_out();
  r.note_input(corpus_path);
  Corpus c = corpus_load_jsonl(corpus_path);
  SplitAssignment split = stratified_split(c, r.cfg.train_frac, r.cfg.val_frac,
                                           r.cfg.test_frac, stage_seed(r.cfg.seed, "split"));
  const std::array<Partition, 3> parts = {Partition::kTrain, Partition::kValidation,
                                          Partition::kTest};
  for (Partition p : parts) {
    Corpus part = select_partition(c, split, p);
    const std::string path = r.out_path(std::string(partition_name(p)) + ".jsonl");
    corpus_save_jsonl(part, path);
    r.adopt(path);
  }

  json counts = json::object();
  std::vector<std::size_t> train_counts;
  std::vector<std::string> present;
  for (std::size_t cls = 0; cls < kCategories.size(); ++cls) {
    const auto& row = split.counts[cls];
    if (row[0] + row[1] + row[2] == 0) continue;
    counts[kCategories[cls]] = {{"train", row[0]}, {"validation", row[1]}, {"test", row[2]}};
    present.push_back(kCategories[cls]);
    train_counts.push_back(row[0]);
  }
  json weights = json::object();
  const std::vector<double> w = class_weights(train_counts);
  for (std::size_t i = 0; i < present.size(); ++i) weights[present[i]] = w[i];

  json side;
  side["seed"] = r.cfg.seed;
  side["fractions"] = {{"train", r.cfg.train_frac},
                       {"validation", r.cfg.val_frac},
                       {"test", r.cfg.test_frac}};
  side["counts"] = counts;
  side["class_weights"] = weights;
  r.write_artifact("split.json", side.dump(2) + "\n");

  std::cout << "split " << c.size() << " documents across " << present.size()
            << " classes\n";
}

void cmd_preprocess(Runner& r, const std::string& corpus_path) {
  r.ensure_out();
  r.note_input(corpus_path);
  Corpus c = corpus_load_jsonl(corpus_path);
  if (c.empty()) throw DataError("preprocess: corpus is empty");

  std::unordered_set<std::string> stopwords;
  if (!r.cfg.stopwords.empty()) {
    r.note_input(r.cfg.stopwords);
    stopwords = load_stopwords(r.cfg.stopwords);
  }
  std::vector<StemRule> rules;
  if (!r.cfg.stems.empty()) {
    r.note_input(r.cfg.stems);
    rules = load_stem_rules(r.cfg.stems);
  }

  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(c.size());
  for (const Document& d : c) tokenized.push_back(preprocess_text(d.text, stopwords, rules));

  Vocabulary vocab;
  if (!r.cfg.vocab.empty()) {
    r.note_input(r.cfg.vocab);
    vocab = vocab_load(r.cfg.vocab);
  } else {
    vocab = build_vocab(tokenized, r.cfg.vocab_cap);
  }
  vocab_save(vocab, r.out_path("vocab.txt"));
  r.adopt(r.out_path("vocab.txt"));

  const Tensor table = make_embedding_table(vocab.size(), r.cfg.emb_dim, r.cfg.seed);
  FeatureSet out_fs;
  out_fs.rows = r.cfg.seq_len;
  out_fs.cols = r.cfg.emb_dim;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out_fs.ids.push_back(c[i].id);
    out_fs.features.push_back(
        embed_rows(table, encode_document(tokenized[i], vocab, r.cfg.seq_len)));
  }
  const std::string feat_path = r.out_path("embedded.feat");
  features_save(out_fs, feat_path);
  r.record(feat_path + ".ids.jsonl");
  r.adopt(feat_path);

  std::cout << "embedded " << out_fs.features.size() << " documents as [" << out_fs.rows
            << "," << out_fs.cols << "] (vocabulary " << vocab.size() << ")\n";
}

void save_history_csv(Runner& r, const std::string& header,
                      const std::vector<std::vector<double>>& columns) {
  std::string text = header + "\n";
  const std::size_t n = columns.empty() ? 0 : columns[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    text += std::to_string(i);
    for (const auto& col : columns) text += "," + fmt_g(col[i]);
    text += "\n";
  }
  r.write_artifact("history.csv", text);
}

void cmd_train_extractor(Runner& r, const std::string& feat_path) {
  if (r.cfg.extractor == ExtractorKind::None)
    throw UsageError("train-extractor: pass --extractor vae|acgan|aae|pca");
  r.ensure_out();
  r.note_input(feat_path);
  FeatureSet fsx = features_load(feat_path);
  if (fsx.features.empty()) throw DataError("train-extractor: no documents in " + feat_path);
  const std::size_t T = fsx.rows, D = fsx.cols;
  const std::uint64_t model_seed = stage_seed(r.cfg.seed, "extractor/model");
  const std::uint64_t train_seed = stage_seed(r.cfg.seed, "extractor/train");

  json side;
  side["kind"] = extractor_name(r.cfg.extractor);

  switch (r.cfg.extractor) {
    case ExtractorKind::Vae: {
      VaeConfig vc;
      vc.seq_len = T;
      vc.input_dim = D;
      vc.hidden = r.cfg.hidden;
      vc.latent = r.cfg.latent;
      VaeModel m = vae_init(vc, model_seed);
      VaeTrainConfig tc;
      tc.epochs = r.cfg.epochs.value_or(tc.epochs);
      tc.batch = r.cfg.batch_size.value_or(tc.batch);
      tc.lr = r.cfg.lr.value_or(tc.lr);
      tc.beta = r.cfg.beta;
      tc.anneal = r.cfg.anneal;
      VaeHistory hist = train_vae(m, fsx.features, tc, train_seed);
      checkpoint_save(m.params, r.out_path("extractor.gft"));
      r.adopt(r.out_path("extractor.gft"));
      side["seq_len"] = T;
      side["input_dim"] = D;
      side["hidden"] = vc.hidden;
      side["latent"] = vc.latent;
      save_history_csv(r, "epoch,loss", {hist.epoch_loss});
      std::cout << "trained vae for " << hist.epoch_loss.size() << " epochs, final loss "
                << fmt_g(hist.epoch_loss.back()) << "\n";
      break;
    }
    case ExtractorKind::Aae: {
      AaeConfig ac;
      ac.seq_len = T;
      ac.input_dim = D;
      ac.hidden = r.cfg.hidden;
      ac.latent = r.cfg.latent;
      AaeModel m = aae_init(ac, model_seed);
      AaeTrainConfig tc;
      tc.epochs = r.cfg.epochs.value_or(tc.epochs);
      tc.batch = r.cfg.batch_size.value_or(tc.batch);
      if (tc.batch < 2)
        throw UsageError("train-extractor: aae needs batch_size of at least 2");
      tc.n_real = tc.batch / 2;
      tc.n_fake = tc.batch / 2;
      tc.lr = r.cfg.lr.value_or(tc.lr);
      tc.beta1_disc = r.cfg.beta1;
      AaeHistory hist = train_aae(m, fsx.features, tc, train_seed);
      checkpoint_save(m.params, r.out_path("extractor.gft"));
      r.adopt(r.out_path("extractor.gft"));
      side["seq_len"] = T;
      side["input_dim"] = D;
      side["hidden"] = ac.hidden;
      side["latent"] = ac.latent;
      save_history_csv(r, "step,disc_loss,recon_loss,fool_loss",
                       {hist.disc_loss, hist.recon_loss, hist.fool_loss});
      std::cout << "trained aae for " << hist.recon_loss.size()
                << " steps, final reconstruction loss " << fmt_g(hist.recon_loss.back())
                << "\n";
      break;
    }
    case ExtractorKind::Acgan: {
      const auto id2label = load_label_map(r);
      const std::vector<std::string> labels = labels_of(fsx, id2label, "train-extractor");
      const LabelSpace ls = label_space_from(labels);
      AcganConfig ac;
      ac.latent = r.cfg.gan_latent;
      ac.classes = ls.names.size();
      ac.label_dim = r.cfg.label_dim;
      ac.seq_len = T;
      ac.emb_dim = D;
      AcganModel m = acgan_init(ac, model_seed);
      AcganTrainConfig tc;
      tc.epochs = r.cfg.epochs.value_or(tc.epochs);
      tc.batch = r.cfg.batch_size.value_or(tc.batch);
      tc.lr = r.cfg.lr.value_or(tc.lr);
      tc.beta1 = r.cfg.beta1;
      AcganHistory hist =
          train_acgan(m, fsx.features, indices_of(labels, ls, "train-extractor"), tc,
                      train_seed);
      checkpoint_save(m.params, r.out_path("extractor.gft"));
      r.adopt(r.out_path("extractor.gft"));
      side["latent"] = ac.latent;
      side["classes"] = ac.classes;
      side["label_dim"] = ac.label_dim;
      side["seq_len"] = T;
      side["emb_dim"] = D;
      side["gen_ch"] = ac.gen_ch;
      side["g_ch1"] = ac.g_ch1;
      side["d_ch1"] = ac.d_ch1;
      side["d_ch2"] = ac.d_ch2;
      side["d_ch3"] = ac.d_ch3;
      side["d_ch4"] = ac.d_ch4;
      side["kernel"] = ac.kernel;
      side["dropout_rate"] = ac.dropout_rate;
      side["labels"] = ls.names;
      save_history_csv(r, "step,d_loss,g_loss", {hist.d_loss, hist.g_loss});
      std::cout << "trained acgan for " << hist.d_loss.size() << " steps, final d/g loss "
                << fmt_g(hist.d_loss.back()) << "/" << fmt_g(hist.g_loss.back()) << "\n";
      break;
    }
    case ExtractorKind::Pca: {
      Tensor rows({fsx.features.size() * T, D});
      for (std::size_t i = 0; i < fsx.features.size(); ++i)
        std::copy(fsx.features[i].data(), fsx.features[i].data() + T * D,
                  rows.data() + i * T * D);
      PcaModel pca = pca_fit(rows, r.cfg.feature_dim);
      checkpoint_save({{"pca/mean", pca.mean}, {"pca/axes", pca.axes}},
                      r.out_path("extractor.gft"));
      r.adopt(r.out_path("extractor.gft"));
      side["k"] = r.cfg.feature_dim;
      side["input_dim"] = D;
      side["explained_ratio"] = pca.explained_ratio;
      double covered = 0.0;
      for (double e : pca.explained_ratio) covered += e;
      std::cout << "fitted pca with " << r.cfg.feature_dim << " components covering "
                << fmt_fixed(100.0 * covered, 2) << "% of variance\n";
      break;
    }
    case ExtractorKind::None: break;
  }
  r.write_artifact("extractor.json", side.dump(2) + "\n");
}

void cmd_extract(Runner& r, const std::string& feat_path, std::string model_dir) {
  r.ensure_out();
  r.note_input(feat_path);
  FeatureSet fsx = features_load(feat_path);
  if (fsx.features.empty()) throw DataError("extract: no documents in " + feat_path);
  if (model_dir.empty()) model_dir = r.cfg.model;

  FeatureSet out_fs;
  out_fs.ids = fsx.ids;

  if (r.cfg.extractor == ExtractorKind::None) {
    out_fs = fsx;
  } else {
    if (model_dir.empty())
      throw UsageError("extract: a trained model directory is required (positional or "
                       "config key \"model\")");
    const std::string side_path = (fs::path(model_dir) / "extractor.json").string();
    const std::string ckpt_path = (fs::path(model_dir) / "extractor.gft").string();
    const json side = json_load(r.read_input(side_path), side_path);
    const std::string stored_kind = jget<std::string>(side, "kind", side_path);
    if (stored_kind != extractor_name(r.cfg.extractor))
      throw UsageError("extract: model at " + model_dir + " is \"" + stored_kind +
                       "\" but --extractor says \"" + extractor_name(r.cfg.extractor) +
                       "\"");
    r.note_input(ckpt_path);
    const std::map<std::string, Tensor> weights = checkpoint_load(ckpt_path);

    Rng sample_rng(stage_seed(r.cfg.seed, "extract/sample"));
    Rng* eps = r.cfg.deterministic ? nullptr : &sample_rng;

    switch (r.cfg.extractor) {
      case ExtractorKind::Vae: {
        VaeConfig vc;
        vc.seq_len = jget<std::size_t>(side, "seq_len", side_path);
        vc.input_dim = jget<std::size_t>(side, "input_dim", side_path);
        vc.hidden = jget<std::size_t>(side, "hidden", side_path);
        vc.latent = jget<std::size_t>(side, "latent", side_path);
        if (vc.seq_len != fsx.rows || vc.input_dim != fsx.cols)
          throw DataError("extract: model expects [" + std::to_string(vc.seq_len) + "," +
                          std::to_string(vc.input_dim) + "] documents");
        VaeModel m = vae_init(vc, 0);
        m.params.load_values(weights);
        m.trained = true;
        out_fs.rows = vc.seq_len;
        out_fs.cols = vc.latent;
        for (const Tensor& doc : fsx.features)
          out_fs.features.push_back(extract_features_vae(m, doc, eps));
        break;
      }
      case ExtractorKind::Aae: {
        AaeConfig ac;
        ac.seq_len = jget<std::size_t>(side, "seq_len", side_path);
        ac.input_dim = jget<std::size_t>(side, "input_dim", side_path);
        ac.hidden = jget<std::size_t>(side, "hidden", side_path);
        ac.latent = jget<std::size_t>(side, "latent", side_path);
        if (ac.seq_len != fsx.rows || ac.input_dim != fsx.cols)
          throw DataError("extract: model expects [" + std::to_string(ac.seq_len) + "," +
                          std::to_string(ac.input_dim) + "] documents");
        AaeModel m = aae_init(ac, 0);
        m.params.load_values(weights);
        m.trained = true;
        out_fs.rows = ac.seq_len;
        out_fs.cols = ac.latent;
        for (const Tensor& doc : fsx.features)
          out_fs.features.push_back(extract_features_aae(m, doc, eps));
        break;
      }
      case ExtractorKind::Acgan: {
        AcganConfig ac;
        ac.latent = jget<std::size_t>(side, "latent", side_path);
        ac.classes = jget<std::size_t>(side, "classes", side_path);
        ac.label_dim = jget<std::size_t>(side, "label_dim", side_path);
        ac.seq_len = jget<std::size_t>(side, "seq_len", side_path);
        ac.emb_dim = jget<std::size_t>(side, "emb_dim", side_path);
        ac.gen_ch = jget<std::size_t>(side, "gen_ch", side_path);
        ac.g_ch1 = jget<std::size_t>(side, "g_ch1", side_path);
        ac.d_ch1 = jget<std::size_t>(side, "d_ch1", side_path);
        ac.d_ch2 = jget<std::size_t>(side, "d_ch2", side_path);
        ac.d_ch3 = jget<std::size_t>(side, "d_ch3", side_path);
        ac.d_ch4 = jget<std::size_t>(side, "d_ch4", side_path);
        ac.kernel = jget<std::size_t>(side, "kernel", side_path);
        ac.dropout_rate = jget<double>(side, "dropout_rate", side_path);
        if (ac.seq_len != fsx.rows || ac.emb_dim != fsx.cols)
          throw DataError("extract: model expects [" + std::to_string(ac.seq_len) + "," +
                          std::to_string(ac.emb_dim) + "] documents");
        AcganModel m = acgan_init(ac, 0);
        m.params.load_values(weights);
        m.trained = true;
        out_fs.rows = ac.seq_len;
        out_fs.cols = ac.d_ch2;
        for (const Tensor& doc : fsx.features)
          out_fs.features.push_back(extract_features_acgan(m, doc));
        break;
      }
      case ExtractorKind::Pca: {
        auto mean_it = weights.find("pca/mean");
        auto axes_it = weights.find("pca/axes");
        if (mean_it == weights.end() || axes_it == weights.end())
          throw DataError("extract: " + ckpt_path + " is not a pca checkpoint");
        PcaModel pca;
        pca.mean = mean_it->second;
        pca.axes = axes_it->second;
        if (pca.mean.shape()[0] != fsx.cols)
          throw DataError("extract: pca model expects " +
                          std::to_string(pca.mean.shape()[0]) + "-wide rows");
        out_fs.rows = fsx.rows;
        out_fs.cols = pca.axes.shape()[1];
        for (const Tensor& doc : fsx.features)
          out_fs.features.push_back(pca_project(pca, doc));
        break;
      }
      case ExtractorKind::None: break;
    }
  }

  const std::string out_feat = r.out_path("features.feat");
  features_save(out_fs, out_feat);
  r.record(out_feat + ".ids.jsonl");
  r.adopt(out_feat);
  std::cout << "extracted " << out_fs.features.size() << " feature matrices of ["
            << out_fs.rows << "," << out_fs.cols << "]\n";
}

void cmd_train_classifier(Runner& r, const std::string& train_path,
                          const std::string& val_path) {
  r.ensure_out();
  r.note_input(train_path);
  r.note_input(val_path);
  FeatureSet tr = features_load(train_path);
  FeatureSet va = features_load(val_path);
  if (tr.rows != va.rows || tr.cols != va.cols)
    throw DataError("train-classifier: train and validation feature shapes differ");

  const auto id2label = load_label_map(r);
  const std::vector<std::string> train_labels = labels_of(tr, id2label, "train-classifier");
  const LabelSpace ls = label_space_from(train_labels);
  const std::vector<int> train_y = indices_of(train_labels, ls, "train-classifier");
  const std::vector<int> val_y =
      indices_of(labels_of(va, id2label, "train-classifier"), ls, "train-classifier");

  ClassifierSpec spec;
  spec.kind = r.cfg.classifier;
  spec.input_len = tr.rows;
  spec.input_dim = tr.cols;
  spec.classes = ls.names.size();
  spec.hidden_layers = r.cfg.hidden_layers;
  spec.units = r.cfg.units;
  spec.heads = r.cfg.heads;
  spec.conv_filters = r.cfg.conv_filters;
  spec.conv_kernels = r.cfg.conv_kernels;
  spec.lstm_units = r.cfg.lstm_units;
  spec.dropout_rate = r.cfg.dropout;

  Classifier model = build_classifier(spec, stage_seed(r.cfg.seed, "classifier/model"),
                                      r.cfg.enforce_ranges);
  ClassifierTrainConfig tc;
  tc.epochs = r.cfg.epochs.value_or(tc.epochs);
  tc.batch = r.cfg.batch_size.value_or(tc.batch);
  tc.lr = r.cfg.lr.value_or(tc.lr);
  tc.patience = r.cfg.patience;
  if (r.cfg.weighted) {
    std::vector<std::size_t> counts(ls.names.size(), 0);
    for (int y : train_y) counts[static_cast<std::size_t>(y)] += 1;
    const std::vector<double> w = class_weights(counts);
    tc.class_weights = std::vector<real>(w.begin(), w.end());
  }
  ClassifierHistory hist =
      train_classifier(model, tr.features, train_y, va.features, val_y, tc,
                       stage_seed(r.cfg.seed, "classifier/train"));

  checkpoint_save(model.params, r.out_path("classifier.gft"));
  r.adopt(r.out_path("classifier.gft"));

  json side;
  side["kind"] = classifier_name(spec.kind);
  side["input_len"] = spec.input_len;
  side["input_dim"] = spec.input_dim;
  side["labels"] = ls.names;
  side["hidden_layers"] = spec.hidden_layers;
  side["units"] = spec.units;
  side["heads"] = spec.heads;
  side["conv_filters"] = spec.conv_filters;
  side["conv_kernels"] = spec.conv_kernels;
  side["lstm_units"] = spec.lstm_units;
  side["dropout"] = spec.dropout_rate;
  side["param_count"] = classifier_param_count(model);
  side["selected_epoch"] = hist.best_epoch;
  side["best_val_recall"] = hist.best_val_recall;
  side["stopped_early"] = hist.stopped_early;
  side["epochs_run"] = hist.train_loss.size();
  if (tc.class_weights)
    side["class_weights"] = *tc.class_weights;
  else
    side["class_weights"] = nullptr;
  r.write_artifact("classifier.json", side.dump(2) + "\n");
  save_history_csv(r, "epoch,train_loss,val_recall", {hist.train_loss, hist.val_recall});

  std::cout << "trained " << classifier_name(spec.kind) << " for "
            << hist.train_loss.size() << " epochs; selected epoch " << hist.best_epoch
            << " with macro validation recall " << fmt_fixed(hist.best_val_recall, 4)
            << (hist.stopped_early ? " (stopped early)" : "") << "\n";
}

void cmd_evaluate(Runner& r, const std::string& feat_path, std::string model_dir) {
  r.ensure_out();
  if (model_dir.empty()) model_dir = r.cfg.model;
  if (model_dir.empty())
    throw UsageError("evaluate: a trained classifier directory is required (positional or "
                     "config key \"model\")");
  const std::string side_path = (fs::path(model_dir) / "classifier.json").string();
  const std::string ckpt_path = (fs::path(model_dir) / "classifier.gft").string();
  const json side = json_load(r.read_input(side_path), side_path);

  ClassifierSpec spec;
  spec.kind = parse_classifier_name(jget<std::string>(side, "kind", side_path));
  spec.input_len = jget<std::size_t>(side, "input_len", side_path);
  spec.input_dim = jget<std::size_t>(side, "input_dim", side_path);
  const std::vector<std::string> names =
      jget<std::vector<std::string>>(side, "labels", side_path);
  spec.classes = names.size();
  spec.hidden_layers = jget<std::size_t>(side, "hidden_layers", side_path);
  spec.units = jget<std::size_t>(side, "units", side_path);
  spec.heads = jget<std::size_t>(side, "heads", side_path);
  spec.conv_filters = jget<std::vector<std::size_t>>(side, "conv_filters", side_path);
  spec.conv_kernels = jget<std::vector<std::size_t>>(side, "conv_kernels", side_path);
  spec.lstm_units = jget<std::vector<std::size_t>>(side, "lstm_units", side_path);
  spec.dropout_rate = jget<double>(side, "dropout", side_path);

  // The stored spec was validated when it was trained; tuning ranges are not
  // re-enforced so reduced research configurations stay loadable.
  Classifier model = build_classifier(spec, 0, /*enforce_ranges=*/false);
  r.note_input(ckpt_path);
  model.params.load_values(checkpoint_load(ckpt_path));
  model.trained = true;

  r.note_input(feat_path);
  FeatureSet fsx = features_load(feat_path);
  if (fsx.rows != spec.input_len || fsx.cols != spec.input_dim)
    throw DataError("evaluate: classifier expects [" + std::to_string(spec.input_len) +
                    "," + std::to_string(spec.input_dim) + "] features");
  LabelSpace ls;
  for (const std::string& n : names) {
    ls.index[n] = static_cast<int>(ls.names.size());
    ls.names.push_back(n);
  }
  const auto id2label = load_label_map(r);
  const std::vector<int> truth = indices_of(labels_of(fsx, id2label, "evaluate"), ls,
                                            "evaluate");

  std::vector<Prediction> preds = classify_batch(model, fsx.features);
  std::vector<int> labels(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) labels[i] = preds[i].label;
  const Confusion cm = confusion_matrix(truth, labels, spec.classes);
  const PrfReport rep = macro_prf(cm);

  json out;
  out["labels"] = names;
  out["confusion"] = cm;
  json per = json::array();
  for (std::size_t c = 0; c < names.size(); ++c)
    per.push_back({{"label", names[c]},
                   {"precision", rep.per_class[c].precision},
                   {"recall", rep.per_class[c].recall},
                   {"f1", rep.per_class[c].f1}});
  out["per_class"] = per;
  out["macro"] = {{"precision", rep.macro.precision},
                  {"recall", rep.macro.recall},
                  {"f1", rep.macro.f1}};
  out["accuracy"] = rep.accuracy;
  r.write_artifact("metrics.json", out.dump(2) + "\n");
  const std::string table = metrics_table_text(names, rep);
  r.write_artifact("metrics.txt", table);
  std::cout << table;
}

struct ScoreGroups {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

// Header must name a `group` and a `score` column; groups keep first-seen
// order so tables read like the input.
ScoreGroups read_scores_csv(Runner& r, const std::string& path) {
  const std::string text = r.read_input(path);
  const std::vector<std::vector<std::string>> rows = parse_csv(text);
  if (rows.empty()) throw DataError("scores: " + path + " is empty");
  std::size_t group_col = rows[0].size(), score_col = rows[0].size();
  for (std::size_t j = 0; j < rows[0].size(); ++j) {
    if (rows[0][j] == "group") group_col = j;
    if (rows[0][j] == "score") score_col = j;
  }
  if (group_col == rows[0].size() || score_col == rows[0].size())
    throw DataError("scores: " + path + " needs \"group\" and \"score\" columns");

  ScoreGroups out;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() == 1 && rows[i][0].empty()) continue;  // trailing newline
    if (rows[i].size() != rows[0].size())
      throw DataError("scores: row " + std::to_string(i + 1) + " has " +
                      std::to_string(rows[i].size()) + " fields, expected " +
                      std::to_string(rows[0].size()));
    const std::string& g = rows[i][group_col];
    const std::string& v = rows[i][score_col];
    char* end = nullptr;
    const double score = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
      throw DataError("scores: row " + std::to_string(i + 1) + ": \"" + v +
                      "\" is not a number");
    auto it = index.find(g);
    if (it == index.end()) {
      index.emplace(g, out.names.size());
      out.names.push_back(g);
      out.values.emplace_back();
      it = index.find(g);
    }
    out.values[it->second].push_back(score);
  }
  if (out.names.empty()) throw DataError("scores: " + path + " has no data rows");
  return out;
}

void cmd_stats_anova(Runner& r, const std::string& csv_path) {
  const ScoreGroups g = read_scores_csv(r, csv_path);
  const AnovaResult res = one_way_anova(g.values);
  std::cout << anova_table_text(res);
  std::cout << "F(" << static_cast<std::size_t>(res.df_between) << ","
            << static_cast<std::size_t>(res.df_within) << ") = " << fmt_fixed(res.f_stat, 2)
            << ", p = " << fmt_fixed(res.p_value, 6) << "\n";
  if (r.out_given) {
    r.ensure_out();
    json out;
    out["groups"] = g.names;
    out["ss_between"] = res.ss_between;
    out["ss_within"] = res.ss_within;
    out["df_between"] = res.df_between;
    out["df_within"] = res.df_within;
    out["ms_between"] = res.ms_between;
    out["ms_within"] = res.ms_within;
    out["f"] = res.f_stat;
    out["p"] = res.p_value;
    r.write_artifact("anova.json", out.dump(2) + "\n");
  }
}

void cmd_stats_tukey(Runner& r, const std::string& csv_path) {
  const ScoreGroups g = read_scores_csv(r, csv_path);
  const std::vector<TukeyRow> rows = tukey_hsd(g.values, r.cfg.alpha);
  std::cout << tukey_table_text(rows, g.names);
  std::size_t rejected = 0;
  for (const TukeyRow& row : rows) rejected += row.reject ? 1 : 0;
  std::cout << "rejected " << rejected << " of " << rows.size()
            << " pairwise null hypotheses at alpha=" << fmt_g(r.cfg.alpha) << "\n";
  if (r.out_given) {
    r.ensure_out();
    json out;
    out["alpha"] = r.cfg.alpha;
    out["groups"] = g.names;
    json pairs = json::array();
    for (const TukeyRow& row : rows)
      pairs.push_back({{"a", g.names[row.a]},
                       {"b", g.names[row.b]},
                       {"diff", row.diff},
                       {"q", row.q},
                       {"p", row.p},
                       {"reject", row.reject}});
    out["pairs"] = pairs;
    r.write_artifact("tukey.json", out.dump(2) + "\n");
  }
}

void cmd_report(Runner& r, const std::vector<std::string>& dirs) {
  r.ensure_out();
  struct Row {
    std::string name;
    bool has_metrics = false;
    double precision = 0, recall = 0, f1 = 0, accuracy = 0;
    std::vector<std::array<double, 3>> curve;  // epoch, train_loss, val_recall
  };
  std::vector<Row> table;
  for (const std::string& dir : dirs) {
    Row row;
    fs::path p(dir);
    row.name = p.filename().string().empty() ? p.parent_path().filename().string()
                                             : p.filename().string();
    if (row.name.empty()) row.name = dir;
    const std::string mpath = (p / "metrics.json").string();
    const std::string hpath = (p / "history.csv").string();
    bool any = false;
    if (fs::exists(mpath)) {
      const json m = json_load(r.read_input(mpath), mpath);
      const json macro = jget<json>(m, "macro", mpath);
      row.precision = jget<double>(macro, "precision", mpath);
      row.recall = jget<double>(macro, "recall", mpath);
      row.f1 = jget<double>(macro, "f1", mpath);
      row.accuracy = jget<double>(m, "accuracy", mpath);
      row.has_metrics = true;
      any = true;
    }
    if (fs::exists(hpath)) {
      std::istringstream ss(r.read_input(hpath));
      std::string line;
      bool header = true;
      while (std::getline(ss, line)) {
        if (header) {
          if (line != "epoch,train_loss,val_recall")
            throw DataError("report: " + hpath + " is not a classifier history");
          header = false;
          continue;
        }
        if (line.empty()) continue;
        std::array<double, 3> vals{};
        std::istringstream fields(line);
        std::string f;
        for (int j = 0; j < 3; ++j) {
          if (!std::getline(fields, f, ','))
            throw DataError("report: " + hpath + ": short row \"" + line + "\"");
          vals[static_cast<std::size_t>(j)] = std::strtod(f.c_str(), nullptr);
        }
        row.curve.push_back(vals);
      }
      any = true;
    }
    if (!any)
      throw DataError("report: " + dir + " holds neither metrics.json nor history.csv");
    table.push_back(std::move(row));
  }

  std::size_t width = 8;
  for (const Row& row : table) width = std::max(width, row.name.size());
  std::ostringstream text;
  auto pad = [&](std::string s) {
    s.resize(width + 2, ' ');
    return s;
  };
  text << pad("run") << "precision  recall     f1         accuracy\n";
  for (const Row& row : table) {
    text << pad(row.name);
    if (row.has_metrics) {
      text << fmt_fixed(row.precision, 4) << "     " << fmt_fixed(row.recall, 4) << "     "
           << fmt_fixed(row.f1, 4) << "     " << fmt_fixed(row.accuracy, 4) << "\n";
    } else {
      text << "-          -          -          -\n";
    }
  }
  r.write_artifact("report.txt", text.str());

  std::string curves = "run,epoch,train_loss,val_recall\n";
  for (const Row& row : table)
    for (const auto& v : row.curve)
      curves += row.name + "," + fmt_g(v[0]) + "," + fmt_g(v[1]) + "," + fmt_g(v[2]) + "\n";
  r.write_artifact("curves.csv", curves);
  std::cout << text.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document feature-extraction research pipeline"};
  app.set_version_flag("--version", std::string("genfeat ") + kToolVersion);
  app.require_subcommand(1);

  std::string flag_config, flag_seed, flag_extractor, flag_classifier, flag_out;
  bool flag_deterministic = false;
  std::string pos1, pos2;
  std::vector<std::string> pos_many;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", flag_config, "key=value configuration file");
    s->add_option("--seed", flag_seed, "master seed (decimal 64-bit)");
    s->add_option("--extractor", flag_extractor, "vae|acgan|aae|pca|none");
    s->add_option("--classifier", flag_classifier, "lstm|bilstm|bilstm-attn|cnn|clstm");
    s->add_flag("--deterministic", flag_deterministic,
                "posterior means instead of sampled codes during extraction");
    s->add_option("--out", flag_out, "output directory");
    return s;
  };

  CLI::App* c_ingest =
      add_common(app.add_subcommand("corpus-ingest", "CSV to a cleaned, labeled corpus"));
  c_ingest->add_option("csv", pos1, "raw corpus CSV")->required();

  CLI::App* c_split = add_common(
      app.add_subcommand("corpus-split", "stratified train/validation/test split"));
  c_split->add_option("corpus", pos1, "corpus JSONL")->required();

  CLI::App* c_prep = add_common(
      app.add_subcommand("preprocess", "tokenize, build vocabulary, embed documents"));
  c_prep->add_option("corpus", pos1, "corpus JSONL")->required();

  CLI::App* c_trainx = add_common(
      app.add_subcommand("train-extractor", "train a feature extractor on embeddings"));
  c_trainx->add_option("embedded", pos1, "embedded documents (.feat)")->required();

  CLI::App* c_extract =
      add_common(app.add_subcommand("extract", "run a trained extractor over embeddings"));
  c_extract->add_option("embedded", pos1, "embedded documents (.feat)")->required();
  c_extract->add_option("model", pos2, "trained extractor directory");

  CLI::App* c_trainc = add_common(
      app.add_subcommand("train-classifier", "train a benchmark classifier on features"));
  c_trainc->add_option("train", pos1, "training features (.feat)")->required();
  c_trainc->add_option("validation", pos2, "validation features (.feat)")->required();

  CLI::App* c_eval =
      add_common(app.add_subcommand("evaluate", "score a trained classifier on features"));
  c_eval->add_option("features", pos1, "evaluation features (.feat)")->required();
  c_eval->add_option("model", pos2, "trained classifier directory");

  CLI::App* c_anova =
      add_common(app.add_subcommand("stats-anova", "one-way ANOVA over grouped scores"));
  c_anova->add_option("scores", pos1, "CSV with group and score columns")->required();

  CLI::App* c_tukey = add_common(
      app.add_subcommand("stats-tukey", "pairwise studentized-range comparisons"));
  c_tukey->add_option("scores", pos1, "CSV with group and score columns")->required();

  CLI::App* c_report =
      add_common(app.add_subcommand("report", "metric tables and training curves"));
  c_report->add_option("runs", pos_many, "run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  CLI::App* active = app.get_subcommands().front();
  Runner r;
  r.command = active->get_name();
  try {
    std::map<std::string, std::string> file_kv;
    if (!flag_config.empty()) file_kv = parse_config_text(read_file(flag_config));
    if (const char* env = std::getenv("GENFEAT_SEED")) {
      if (!file_kv.count("seed") && active->count("--seed") == 0 && env[0] != '\0')
        file_kv["seed"] = env;
    }
    std::map<std::string, std::string> overrides;
    if (active->count("--seed")) overrides["seed"] = flag_seed;
    if (active->count("--extractor")) overrides["extractor"] = flag_extractor;
    if (active->count("--classifier")) overrides["classifier"] = flag_classifier;
    if (active->count("--deterministic")) overrides["deterministic"] = "true";
    if (active->count("--out")) overrides["out"] = flag_out;
    r.cfg = make_run_config(file_kv, overrides);
    r.out_given = active->count("--out") > 0 || file_kv.count("out") > 0;

    if (active == c_ingest) cmd_corpus_ingest(r, pos1);
    else if (active == c_split) cmd_corpus_split(r, pos1);
    else if (active == c_prep) cmd_preprocess(r, pos1);
    else if (active == c_trainx) cmd_train_extractor(r, pos1);
    else if (active == c_extract) cmd_extract(r, pos1, pos2);
    else if (active == c_trainc) cmd_train_classifier(r, pos1, pos2);
    else if (active == c_eval) cmd_evaluate(r, pos1, pos2);
    else if (active == c_anova) cmd_stats_anova(r, pos1);
    else if (active == c_tukey) cmd_stats_tukey(r, pos1);
    else if (active == c_report) cmd_report(r, pos_many);
    return 0;
  } catch (const Error& e) {
    r.cleanup();
    std::cerr << "genfeat " << r.command << ": error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    r.cleanup();
    std::cerr << "genfeat " << r.command << ": internal error: " << e.what() << "\n";
    return 3;
  }
}
