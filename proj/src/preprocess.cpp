#include "genfeat/preprocess.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "genfeat/errors.hpp"
#include "genfeat/fileio.hpp"
#include "genfeat/rng.hpp"

namespace genfeat {

namespace {

void bad_utf8(std::size_t at) {
  throw DataError("invalid UTF-8 at byte " + std::to_string(at));
}

struct Range {
  char32_t lo, hi;
};

// Letters and combining marks of the scripts the corpus can contain. Sorted
// by codepoint for binary search.
constexpr Range kLetterRanges[] = {
    {0x0041, 0x005A},  // A-Z
    {0x0061, 0x007A},  // a-z
    {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x024F},  // Latin-1 / Extended
    {0x0370, 0x0373}, {0x0376, 0x0377}, {0x037B, 0x037D},
    {0x0386, 0x0386}, {0x0388, 0x03FF},                    // Greek
    {0x0400, 0x0481}, {0x048A, 0x052F},                    // Cyrillic
    {0x0620, 0x064A}, {0x064B, 0x065F}, {0x066E, 0x06D3},  // Arabic letters + marks
    {0x0900, 0x0963},                                       // Devanagari (danda excluded)
    {0x0971, 0x097F},
    {0x0980, 0x0983}, {0x0985, 0x098C}, {0x098F, 0x0990},  // Bengali
    {0x0993, 0x09A8}, {0x09AA, 0x09B0}, {0x09B2, 0x09B2},
    {0x09B6, 0x09B9}, {0x09BC, 0x09C4},
    {0x09C7, 0x09C8}, {0x09CB, 0x09CE}, {0x09D7, 0x09D7},
    {0x09DC, 0x09DD}, {0x09DF, 0x09E3}, {0x09F0, 0x09F1},
};

bool is_letter_or_mark(char32_t cp) {
  auto it = std::upper_bound(std::begin(kLetterRanges), std::end(kLetterRanges), cp,
                             [](char32_t v, const Range& r) { return v < r.lo; });
  if (it == std::begin(kLetterRanges)) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<char32_t> utf8_decode(const std::string& text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      len = 4;
    } else {
      bad_utf8(i);
    }
    if (i + len > text.size()) bad_utf8(i);
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) bad_utf8(i + k);
      cp = (cp << 6) | (cc & 0x3F);
    }
    constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (len > 1 && cp < kMin[len]) bad_utf8(i);                 // overlong form
    if (cp >= 0xD800 && cp <= 0xDFFF) bad_utf8(i);              // surrogate
    if (cp > 0x10FFFF) bad_utf8(i);
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size() * 3);
  for (char32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::size_t utf8_length(const std::string& text) { return utf8_decode(text).size(); }

std::string normalize_text(const std::string& raw) {
  std::vector<char32_t> cps = utf8_decode(raw);
  std::vector<char32_t> out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    // Composed nukta letters decompose: rra, rha, yya.
    if (cp == 0x09DC) {
      out.push_back(0x09A1);
      out.push_back(0x09BC);
    } else if (cp == 0x09DD) {
      out.push_back(0x09A2);
      out.push_back(0x09BC);
    } else if (cp == 0x09DF) {
      out.push_back(0x09AF);
      out.push_back(0x09BC);
    } else if ((cp == 0x09BE || cp == 0x09D7) && !out.empty() && out.back() == 0x09C7) {
      // e + aa -> o, e + au-length-mark -> au.
      out.back() = cp == 0x09BE ? 0x09CB : 0x09CC;
    } else {
      out.push_back(cp);
    }
  }
  return utf8_encode(out);
}

std::string clean_text(const std::string& raw) {
  std::vector<char32_t> cps = utf8_decode(normalize_text(raw));
  std::vector<char32_t> out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_letter_or_mark(cp)) {
      if (pending_space && !out.empty()) out.push_back(U' ');
      pending_space = false;
      out.push_back(cp);
    } else {
      // Whitespace, digits, punctuation, and symbols all separate words.
      pending_space = true;
    }
  }
  return utf8_encode(out);
}

std::vector<std::string> tokenize(const std::string& cleaned) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t b = i;
    while (i < cleaned.size() && cleaned[i] != ' ') ++i;
    if (i > b) tokens.push_back(cleaned.substr(b, i - b));
  }
  return tokens;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::string buf = read_file(path);
  if (!buf.empty() && buf.compare(0, 3, "\xEF\xBB\xBF") == 0) buf.erase(0, 3);
  std::unordered_set<std::string> words;
  std::istringstream in(buf);
  std::string line;
  while (std::getline(in, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (!line.empty()) words.insert(normalize_text(line));
  }
  return words;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const std::unordered_set<std::string>& stopwords) {
  std::vector<std::string> kept;
  kept.reserve(tokens.size());
  for (const std::string& t : tokens) {
    if (stopwords.find(t) == stopwords.end()) kept.push_back(t);
  }
  return kept;
}

std::vector<StemRule> load_stem_rules(const std::string& path) {
  std::string buf = read_file(path);
  if (!buf.empty() && buf.compare(0, 3, "\xEF\xBB\xBF") == 0) buf.erase(0, 3);
  std::vector<StemRule> rules;
  std::istringstream in(buf);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (strip(line).empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected suffix<TAB>min_stem_len");
    }
    StemRule rule;
    rule.suffix = normalize_text(strip(line.substr(0, tab)));
    std::string count = strip(line.substr(tab + 1));
    if (rule.suffix.empty() || count.empty() ||
        count.find_first_not_of("0123456789") != std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed stemming rule");
    }
    rule.min_stem_len = static_cast<std::size_t>(std::stoull(count));
    if (rule.min_stem_len == 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": min_stem_len must be positive");
    }
    rules.push_back(std::move(rule));
  }
  // Longest suffix tried first; equal lengths keep a stable lexicographic order.
  std::stable_sort(rules.begin(), rules.end(), [](const StemRule& a, const StemRule& b) {
    std::size_t la = utf8_length(a.suffix), lb = utf8_length(b.suffix);
    if (la != lb) return la > lb;
    return a.suffix < b.suffix;
  });
  return rules;
}

std::vector<std::string> stem(const std::vector<std::string>& tokens,
                              const std::vector<StemRule>& rules) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& token : tokens) {
    std::string stemmed = token;
    for (const StemRule& rule : rules) {
      if (token.size() <= rule.suffix.size()) continue;
      if (token.compare(token.size() - rule.suffix.size(), rule.suffix.size(), rule.suffix) != 0) {
        continue;
      }
      std::string candidate = token.substr(0, token.size() - rule.suffix.size());
      if (utf8_length(candidate) < rule.min_stem_len) continue;
      stemmed = std::move(candidate);
      break;  // at most one rule per token
    }
    out.push_back(std::move(stemmed));
  }
  return out;
}

std::vector<std::string> preprocess_text(const std::string& raw,
                                         const std::unordered_set<std::string>& stopwords,
                                         const std::vector<StemRule>& rules) {
  return stem(remove_stopwords(tokenize(clean_text(raw)), stopwords), rules);
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t cap) {
  if (cap < 2) throw DataError("build_vocab: cap must leave room for padding and unknown");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus) {
    for (const std::string& t : doc) freq[t] += 1;
  }
  if (freq.empty()) throw DataError("build_vocab: corpus has no tokens");
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.tokens = {"<pad>", "<unk>"};
  v.index["<pad>"] = Vocabulary::kPad;
  v.index["<unk>"] = Vocabulary::kUnk;
  for (const auto& [token, count] : ranked) {
    (void)count;
    if (v.tokens.size() >= cap) break;
    v.index[token] = static_cast<int>(v.tokens.size());
    v.tokens.push_back(token);
  }
  return v;
}

void vocab_save(const Vocabulary& vocab, const std::string& path) {
  std::string out;
  for (const std::string& t : vocab.tokens) {
    out += t;
    out += '\n';
  }
  write_file_atomic(path, out);
}

Vocabulary vocab_load(const std::string& path) {
  const std::string text = read_file(path);
  Vocabulary v;
  std::string line;
  std::istringstream ss(text);
  while (std::getline(ss, line)) {
    if (v.index.count(line))
      throw DataError("vocab_load: duplicate token \"" + line + "\" in " + path);
    v.index[line] = static_cast<int>(v.tokens.size());
    v.tokens.push_back(line);
  }
  if (v.tokens.size() < 2 || v.tokens[0] != "<pad>" || v.tokens[1] != "<unk>")
    throw DataError("vocab_load: " + path + " must start with <pad> and <unk>");
  return v;
}

std::vector<int> encode_document(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab, std::size_t length) {
  std::vector<int> out(length, Vocabulary::kPad);
  std::size_t n = std::min(length, tokens.size());
  for (std::size_t i = 0; i < n; ++i) out[i] = vocab.lookup(tokens[i]);
  return out;
}

Tensor make_embedding_table(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  if (vocab_size < 2)
    throw DataError("make_embedding_table: vocabulary must hold the two reserved slots");
  if (dim == 0) throw DataError("make_embedding_table: dimension must be positive");
  Rng rng(stage_seed(seed, "embed/table"));
  Tensor t({vocab_size, dim});
  for (std::size_t r = 1; r < vocab_size; ++r)
    for (std::size_t c = 0; c < dim; ++c) t.data()[r * dim + c] = rng.uniform(-0.05, 0.05);
  return t;
}

}  // namespace genfeat
