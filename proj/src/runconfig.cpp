#include "genfeat/runconfig.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "genfeat/errors.hpp"
#include "genfeat/rng.hpp"

namespace genfeat {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty() || v[0] == '-')
    throw UsageError("config key " + key + ": expected a non-negative integer, got \"" +
                     value + "\"");
  char* end = nullptr;
  errno = 0;
  unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size())
    throw UsageError("config key " + key + ": expected a non-negative integer, got \"" +
                     value + "\"");
  return static_cast<std::uint64_t>(n);
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  errno = 0;
  double d = v.empty() ? 0.0 : std::strtod(v.c_str(), &end);
  if (v.empty() || errno != 0 || end != v.c_str() + v.size() || !std::isfinite(d))
    throw UsageError("config key " + key + ": expected a finite number, got \"" + value +
                     "\"");
  return d;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw UsageError("config key " + key + ": expected true or false, got \"" + value + "\"");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::string item;
  std::istringstream ss(trim(value));
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<std::size_t>(parse_u64(key, item)));
  if (out.empty())
    throw UsageError("config key " + key + ": expected a comma-separated list, got \"" +
                     value + "\"");
  return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

ExtractorKind parse_extractor(const std::string& name) {
  if (name == "none") return ExtractorKind::None;
  if (name == "vae") return ExtractorKind::Vae;
  if (name == "acgan") return ExtractorKind::Acgan;
  if (name == "aae") return ExtractorKind::Aae;
  if (name == "pca") return ExtractorKind::Pca;
  throw UsageError("unknown extractor \"" + name + "\" (expected vae|acgan|aae|pca|none)");
}

const char* extractor_name(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::None: return "none";
    case ExtractorKind::Vae: return "vae";
    case ExtractorKind::Acgan: return "acgan";
    case ExtractorKind::Aae: return "aae";
    case ExtractorKind::Pca: return "pca";
  }
  return "none";
}

ClassifierKind parse_classifier_name(const std::string& name) {
  if (name == "lstm") return ClassifierKind::Lstm;
  if (name == "bilstm") return ClassifierKind::Bilstm;
  if (name == "bilstm-attn") return ClassifierKind::BilstmAttention;
  if (name == "cnn") return ClassifierKind::Cnn;
  if (name == "clstm") return ClassifierKind::Clstm;
  throw UsageError("unknown classifier \"" + name +
                   "\" (expected lstm|bilstm|bilstm-attn|cnn|clstm)");
}

const char* classifier_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::Lstm: return "lstm";
    case ClassifierKind::Bilstm: return "bilstm";
    case ClassifierKind::BilstmAttention: return "bilstm-attn";
    case ClassifierKind::Cnn: return "cnn";
    case ClassifierKind::Clstm: return "clstm";
  }
  return "lstm";
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key=value, got \"" + line + "\"");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "alpha",        "anneal",      "batch_size",     "beta",
      "beta1",        "classifier",  "conv_filters",   "conv_kernels",
      "corpus",       "deterministic", "dropout",      "emb_dim",
      "enforce_ranges", "epochs",    "extractor",      "feature_dim",
      "gan_latent",   "heads",       "hidden",         "hidden_layers",
      "label_dim",    "latent",      "lr",             "lstm_units",
      "max_words",    "model",       "out",            "patience",
      "seed",         "seq_len",     "stems",          "stopwords",
      "test_frac",    "train_frac",  "units",          "val_frac",
      "vocab",        "vocab_cap",   "weighted",
  };
  return keys;
}

std::string suggest_config_key(const std::string& key) {
  std::string best;
  std::size_t best_d = 4;
  for (const std::string& k : config_keys()) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

RunConfig make_run_config(const std::map<std::string, std::string>& file_values,
                          const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> merged = file_values;
  for (const auto& [k, v] : overrides) merged[k] = v;

  RunConfig cfg;
  for (const auto& [key, value] : merged) {
    if (key == "corpus") cfg.corpus = value;
    else if (key == "stopwords") cfg.stopwords = value;
    else if (key == "stems") cfg.stems = value;
    else if (key == "vocab") cfg.vocab = value;
    else if (key == "model") cfg.model = value;
    else if (key == "out") cfg.out = value;
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "extractor") cfg.extractor = parse_extractor(trim(value));
    else if (key == "classifier") cfg.classifier = parse_classifier_name(trim(value));
    else if (key == "deterministic") cfg.deterministic = parse_bool(key, value);
    else if (key == "seq_len") cfg.seq_len = parse_u64(key, value);
    else if (key == "emb_dim") cfg.emb_dim = parse_u64(key, value);
    else if (key == "feature_dim") cfg.feature_dim = parse_u64(key, value);
    else if (key == "vocab_cap") cfg.vocab_cap = parse_u64(key, value);
    else if (key == "max_words") cfg.max_words = parse_u64(key, value);
    else if (key == "train_frac") cfg.train_frac = parse_double(key, value);
    else if (key == "val_frac") cfg.val_frac = parse_double(key, value);
    else if (key == "test_frac") cfg.test_frac = parse_double(key, value);
    else if (key == "epochs") cfg.epochs = parse_u64(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_u64(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "patience") cfg.patience = parse_u64(key, value);
    else if (key == "beta") cfg.beta = parse_double(key, value);
    else if (key == "anneal") cfg.anneal = parse_bool(key, value);
    else if (key == "beta1") cfg.beta1 = parse_double(key, value);
    else if (key == "gan_latent") cfg.gan_latent = parse_u64(key, value);
    else if (key == "label_dim") cfg.label_dim = parse_u64(key, value);
    else if (key == "latent") cfg.latent = parse_u64(key, value);
    else if (key == "hidden") cfg.hidden = parse_u64(key, value);
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "hidden_layers") cfg.hidden_layers = parse_u64(key, value);
    else if (key == "units") cfg.units = parse_u64(key, value);
    else if (key == "heads") cfg.heads = parse_u64(key, value);
    else if (key == "dropout") cfg.dropout = parse_double(key, value);
    else if (key == "weighted") cfg.weighted = parse_bool(key, value);
    else if (key == "enforce_ranges") cfg.enforce_ranges = parse_bool(key, value);
    else if (key == "conv_filters") cfg.conv_filters = parse_size_list(key, value);
    else if (key == "conv_kernels") cfg.conv_kernels = parse_size_list(key, value);
    else if (key == "lstm_units") cfg.lstm_units = parse_size_list(key, value);
    else {
      const std::string near = suggest_config_key(key);
      std::string msg = "unknown config key \"" + key + "\"";
      if (!near.empty()) msg += " (did you mean \"" + near + "\"?)";
      throw UsageError(msg);
    }
  }

  if (cfg.seq_len == 0 || cfg.emb_dim == 0 || cfg.feature_dim == 0)
    throw UsageError("config: seq_len, emb_dim and feature_dim must be positive");
  if (cfg.vocab_cap < 2) throw UsageError("config: vocab_cap must be at least 2");
  if (cfg.max_words == 0) throw UsageError("config: max_words must be positive");
  if (!(cfg.train_frac > 0.0) || !(cfg.val_frac > 0.0) || !(cfg.test_frac > 0.0))
    throw UsageError("config: split fractions must be positive");
  if (std::fabs(cfg.train_frac + cfg.val_frac + cfg.test_frac - 1.0) > 1e-6)
    throw UsageError("config: split fractions must sum to 1");
  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0))
    throw UsageError("config: alpha must be in (0,1)");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw UsageError("config: dropout must be in [0,1)");
  if (cfg.epochs && *cfg.epochs == 0) throw UsageError("config: epochs must be positive");
  if (cfg.batch_size && *cfg.batch_size == 0)
    throw UsageError("config: batch_size must be positive");
  if (cfg.lr && !(*cfg.lr > 0.0)) throw UsageError("config: lr must be positive");
  return cfg;
}

std::string config_canonical_text(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["alpha"] = fmt_double(cfg.alpha);
  kv["anneal"] = cfg.anneal ? "true" : "false";
  kv["batch_size"] = cfg.batch_size ? std::to_string(*cfg.batch_size) : "default";
  kv["beta"] = fmt_double(cfg.beta);
  kv["beta1"] = fmt_double(cfg.beta1);
  kv["classifier"] = classifier_name(cfg.classifier);
  kv["conv_filters"] = fmt_list(cfg.conv_filters);
  kv["conv_kernels"] = fmt_list(cfg.conv_kernels);
  kv["corpus"] = cfg.corpus;
  kv["deterministic"] = cfg.deterministic ? "true" : "false";
  kv["dropout"] = fmt_double(cfg.dropout);
  kv["emb_dim"] = std::to_string(cfg.emb_dim);
  kv["enforce_ranges"] = cfg.enforce_ranges ? "true" : "false";
  kv["epochs"] = cfg.epochs ? std::to_string(*cfg.epochs) : "default";
  kv["extractor"] = extractor_name(cfg.extractor);
  kv["feature_dim"] = std::to_string(cfg.feature_dim);
  kv["gan_latent"] = std::to_string(cfg.gan_latent);
  kv["heads"] = std::to_string(cfg.heads);
  kv["hidden"] = std::to_string(cfg.hidden);
  kv["hidden_layers"] = std::to_string(cfg.hidden_layers);
  kv["label_dim"] = std::to_string(cfg.label_dim);
  kv["latent"] = std::to_string(cfg.latent);
  kv["lr"] = cfg.lr ? fmt_double(*cfg.lr) : "default";
  kv["lstm_units"] = fmt_list(cfg.lstm_units);
  kv["max_words"] = std::to_string(cfg.max_words);
  kv["model"] = cfg.model;
  kv["out"] = cfg.out;
  kv["patience"] = std::to_string(cfg.patience);
  kv["seed"] = std::to_string(cfg.seed);
  kv["seq_len"] = std::to_string(cfg.seq_len);
  kv["stems"] = cfg.stems;
  kv["stopwords"] = cfg.stopwords;
  kv["test_frac"] = fmt_double(cfg.test_frac);
  kv["train_frac"] = fmt_double(cfg.train_frac);
  kv["units"] = std::to_string(cfg.units);
  kv["val_frac"] = fmt_double(cfg.val_frac);
  kv["vocab"] = cfg.vocab;
  kv["vocab_cap"] = std::to_string(cfg.vocab_cap);
  kv["weighted"] = cfg.weighted ? "true" : "false";
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string config_fingerprint(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_canonical_text(cfg))));
  return buf;
}

}  // namespace genfeat
