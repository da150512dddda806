#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "genfeat/classifiers.hpp"

namespace genfeat {

enum class ExtractorKind { None, Vae, Acgan, Aae, Pca };

ExtractorKind parse_extractor(const std::string& name);
const char* extractor_name(ExtractorKind k);

// Command-line names: lstm, bilstm, bilstm-attn, cnn, clstm.
ClassifierKind parse_classifier_name(const std::string& name);
const char* classifier_name(ClassifierKind k);

// Everything a pipeline command can be told, merged from a key=value config
// file and flag overrides. Stage-specific training defaults apply where the
// optionals stay empty.
struct RunConfig {
  // Paths. `corpus` names the JSONL labels source, `vocab` an existing token
  // table to reuse, `model` the directory holding a trained artifact.
  std::string corpus;
  std::string stopwords;
  std::string stems;
  std::string vocab;
  std::string model;
  std::string out = ".";

  std::uint64_t seed = 42;
  ExtractorKind extractor = ExtractorKind::None;
  ClassifierKind classifier = ClassifierKind::Cnn;
  bool deterministic = false;

  std::size_t seq_len = 200;
  std::size_t emb_dim = 128;
  std::size_t feature_dim = 32;
  std::size_t vocab_cap = 50000;
  std::size_t max_words = 200;

  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;

  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::size_t patience = 10;

  double beta = 1.0;   // KL weight
  bool anneal = false;
  double beta1 = 0.5;  // Adam beta1 in adversarial phases
  std::size_t gan_latent = 100;
  std::size_t label_dim = 50;
  std::size_t latent = 32;
  std::size_t hidden = 64;

  double alpha = 0.05;  // pairwise-test significance level

  std::size_t hidden_layers = 4;
  std::size_t units = 128;
  std::size_t heads = 4;
  double dropout = 0.2;
  bool weighted = true;
  bool enforce_ranges = true;
  std::vector<std::size_t> conv_filters = {128, 128, 256, 256};
  std::vector<std::size_t> conv_kernels = {5, 5, 3, 3};
  std::vector<std::size_t> lstm_units = {128, 128, 64, 64};
};

// key=value lines, '#' starts a comment, blank lines ignored, later keys
// win. Malformed lines throw UsageError with the line number.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Merges overrides on top of file values, rejects unknown keys (suggesting
// the closest known one), converts and range-checks every value.
RunConfig make_run_config(const std::map<std::string, std::string>& file_values,
                          const std::map<std::string, std::string>& overrides);

const std::vector<std::string>& config_keys();
// Closest known key within edit distance 3, or empty.
std::string suggest_config_key(const std::string& key);

// Sorted key=value rendering of the effective configuration, and its 64-bit
// FNV-1a fingerprint as 16 hex digits. Byte-stable for equal configs.
std::string config_canonical_text(const RunConfig& cfg);
std::string config_fingerprint(const RunConfig& cfg);

}  // namespace genfeat
