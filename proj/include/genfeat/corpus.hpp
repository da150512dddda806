#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace genfeat {

// The seven benchmark categories, in table order. Class indices everywhere
// refer to positions in this array.
inline constexpr std::array<const char*, 7> kCategories = {
    "Govt. & Politics", "Science & Technology", "Economics",      "Health & Lifestyle",
    "Entertainment",    "Arts & Literature",    "Sports",
};

std::size_t category_index(const std::string& name);
bool is_category(const std::string& name);

struct Document {
  std::string id;
  std::string text;
  std::string label;  // empty until resolved
  std::string source;
  std::vector<std::string> votes;  // up to 5 annotation votes
};

using Corpus = std::vector<Document>;

// CSV ingest. Header must be `id,text,label,source,votes`; label, source and
// votes may be empty. Votes are `;`-separated. Rows that cannot be used
// (wrong field count, empty id or text, duplicate id, unknown label) are
// skipped with a diagnostic carrying the line number.
Corpus ingest_csv(const std::string& path, std::vector<std::string>* warnings = nullptr);

// RFC 4180 field splitting for one in-memory CSV payload. Exposed for tests.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// Normalized-text duplicate removal: letters of either script, lowercased
// ASCII, single spaces. The earliest document in corpus order survives.
std::string dedupe_key(const std::string& text);
Corpus dedupe(const Corpus& corpus);

// Sentence-bounded greedy packing. Documents at or under `max_words` pass
// through unchanged; split children get ids `<parent>#1`, `<parent>#2`, ...
// and inherit the label. A single sentence longer than `max_words` is
// hard-split at word boundaries with a diagnostic.
std::vector<Document> split_long_document(const Document& doc, std::size_t max_words,
                                          std::vector<std::string>* warnings = nullptr);
Corpus split_long_documents(const Corpus& corpus, std::size_t max_words,
                            std::vector<std::string>* warnings = nullptr);

// Strict plurality over at most five votes; ties are annotation-quality
// failures and throw TieError.
std::string majority_vote(const std::vector<std::string>& votes);
// Applies majority_vote to every unlabeled document with votes.
Corpus resolve_labels(const Corpus& corpus);

enum class Partition { kTrain = 0, kValidation = 1, kTest = 2 };
const char* partition_name(Partition p);

struct SplitAssignment {
  std::unordered_map<std::string, Partition> partition_of;
  // Per-class document counts in each partition, indexed [class][partition].
  std::vector<std::array<std::size_t, 3>> counts;
};

// Seeded per-class shuffle, then largest-remainder rounding of the three
// fractions within each class. Every document must carry a known label and
// every class needs at least three documents.
SplitAssignment stratified_split(const Corpus& corpus, double train_frac, double val_frac,
                                 double test_frac, std::uint64_t seed);
Corpus select_partition(const Corpus& corpus, const SplitAssignment& split, Partition p);

// Balanced class weights w_c = N / (K * n_c).
std::vector<double> class_weights(const std::vector<std::size_t>& train_counts);

// JSONL persistence: one {"id","text","label","source"} object per line.
void corpus_save_jsonl(const Corpus& corpus, const std::string& path);
Corpus corpus_load_jsonl(const std::string& path);

// Per-category count and average characters/words/sentences table.
struct CategoryStats {
  std::string name;
  std::size_t docs = 0;
  double avg_chars = 0;
  double avg_words = 0;
  double avg_sentences = 0;
};
std::vector<CategoryStats> corpus_stats(const Corpus& corpus);
std::string stats_table_text(const std::vector<CategoryStats>& stats);

}  // namespace genfeat
