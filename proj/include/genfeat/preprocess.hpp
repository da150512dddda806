#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "genfeat/tensor.hpp"

namespace genfeat {

// Token index table. Index 0 is padding, index 1 is the unknown token, real
// tokens occupy dense indices from 2 upward.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::unordered_map<std::string, int> index;
  std::vector<std::string> tokens;  // tokens[i] names index i, [0]="<pad>", [1]="<unk>"

  std::size_t size() const { return tokens.size(); }
  int lookup(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? kUnk : it->second;
  }
};

struct StemRule {
  std::string suffix;        // UTF-8 suffix to strip
  std::size_t min_stem_len;  // minimum codepoints the stem keeps
};

// Decodes UTF-8, throwing DataError on malformed bytes (overlong forms,
// surrogates, truncated sequences).
std::vector<char32_t> utf8_decode(const std::string& text);
std::string utf8_encode(const std::vector<char32_t>& cps);
std::size_t utf8_length(const std::string& text);

// Canonical composition for the Bengali block: vowel-sign pairs e+aa / e+ya
// compose to their single codepoints, and the three composed nukta letters
// decompose (they are composition exclusions). Other text passes through, so
// visually identical spellings hash and tokenize identically.
std::string normalize_text(const std::string& raw);

// Keeps letters and combining marks (Latin, Greek, Cyrillic, Arabic,
// Devanagari, Bengali blocks); everything else becomes a separator. Runs of
// whitespace collapse to single spaces and the ends are trimmed.
std::string clean_text(const std::string& raw);

std::vector<std::string> tokenize(const std::string& cleaned);

// Stopword files are UTF-8, one token per line, '#' starts a comment.
std::unordered_set<std::string> load_stopwords(const std::string& path);
std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const std::unordered_set<std::string>& stopwords);

// Rule files are tab-separated `suffix<TAB>min_stem_len`. Rules apply longest
// suffix first; at most one rule strips per token.
std::vector<StemRule> load_stem_rules(const std::string& path);
std::vector<std::string> stem(const std::vector<std::string>& tokens,
                              const std::vector<StemRule>& rules);

// clean -> tokenize -> remove stopwords -> stem.
std::vector<std::string> preprocess_text(const std::string& raw,
                                         const std::unordered_set<std::string>& stopwords,
                                         const std::vector<StemRule>& rules);

// Most frequent tokens win; ties break lexicographically. `cap` bounds the
// table including the two reserved slots and must be at least 2.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t cap);

// One token per line, line number = index. The file must start with the two
// reserved entries and may not repeat a token.
void vocab_save(const Vocabulary& vocab, const std::string& path);
Vocabulary vocab_load(const std::string& path);

// Truncates to `length` tokens and right-pads with the padding index.
std::vector<int> encode_document(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab, std::size_t length);

// Fixed token-embedding table [vocab_size, dim]: entries uniform in
// (-0.05, 0.05) drawn from stage "embed/table" of `seed`; the padding row
// (index 0) is zero so padded positions stay silent.
Tensor make_embedding_table(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

}  // namespace genfeat
