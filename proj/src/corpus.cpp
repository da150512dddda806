#include "genfeat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "genfeat/errors.hpp"
#include "genfeat/fileio.hpp"
#include "genfeat/preprocess.hpp"
#include "genfeat/rng.hpp"

namespace genfeat {

namespace {

void warn(std::vector<std::string>* warnings, const std::string& msg) {
  if (warnings) warnings->push_back(msg);
}

std::vector<std::string> split_votes(const std::string& field) {
  std::vector<std::string> votes;
  std::size_t b = 0;
  while (b <= field.size()) {
    std::size_t e = field.find(';', b);
    if (e == std::string::npos) e = field.size();
    std::string v = field.substr(b, e - b);
    std::size_t f = v.find_first_not_of(" \t");
    if (f != std::string::npos) {
      std::size_t l = v.find_last_not_of(" \t");
      votes.push_back(v.substr(f, l - f + 1));
    }
    b = e + 1;
    if (e == field.size()) break;
  }
  return votes;
}

// Sentence terminators: Bangla danda, question mark, exclamation mark.
bool is_terminator_at(const std::string& text, std::size_t i, std::size_t* len) {
  if (text[i] == '?' || text[i] == '!') {
    *len = 1;
    return true;
  }
  // Danda U+0964 and double danda U+0965 encode as E0 A5 A4 / E0 A5 A5.
  if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE0 &&
      static_cast<unsigned char>(text[i + 1]) == 0xA5 &&
      (static_cast<unsigned char>(text[i + 2]) == 0xA4 ||
       static_cast<unsigned char>(text[i + 2]) == 0xA5)) {
    *len = 3;
    return true;
  }
  return false;
}

// Splits text into sentences, each keeping its trailing terminator.
std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::size_t start = 0, i = 0;
  while (i < text.size()) {
    std::size_t tlen = 0;
    if (is_terminator_at(text, i, &tlen)) {
      sentences.push_back(text.substr(start, i + tlen - start));
      i += tlen;
      start = i;
    } else {
      ++i;
    }
  }
  if (start < text.size()) sentences.push_back(text.substr(start));
  // Drop fragments that are only whitespace.
  std::vector<std::string> out;
  for (std::string& s : sentences) {
    std::size_t f = s.find_first_not_of(" \t\r\n");
    if (f == std::string::npos) continue;
    std::size_t l = s.find_last_not_of(" \t\r\n");
    out.push_back(s.substr(f, l - f + 1));
  }
  return out;
}

std::vector<std::string> whitespace_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string join_words(const std::vector<std::string>& words, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

std::size_t category_index(const std::string& name) {
  for (std::size_t i = 0; i < kCategories.size(); ++i) {
    if (name == kCategories[i]) return i;
  }
  throw DataError("unknown category \"" + name + "\"");
}

bool is_category(const std::string& name) {
  for (const char* c : kCategories) {
    if (name == c) return true;
  }
  return false;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
    } else if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_row();
      i += 2;
    } else if (c == '\n') {
      end_row();
      ++i;
    } else {
      field += c;
      field_started = true;
      ++i;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

Corpus ingest_csv(const std::string& path, std::vector<std::string>* warnings) {
  std::string buf = read_file(path);
  if (!buf.empty() && buf.compare(0, 3, "\xEF\xBB\xBF") == 0) buf.erase(0, 3);
  if (buf.find_first_not_of(" \t\r\n") == std::string::npos) {
    warn(warnings, path + ": empty file, no documents ingested");
    return {};
  }
  std::vector<std::vector<std::string>> rows = parse_csv(buf);
  const std::vector<std::string> header = {"id", "text", "label", "source", "votes"};
  if (rows.empty() || rows[0] != header) {
    throw DataError(path + ": expected header id,text,label,source,votes");
  }
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::string where = path + ": row " + std::to_string(r + 1);
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      warn(warnings, where + ": expected 5 fields, got " + std::to_string(row.size()));
      continue;
    }
    Document d;
    d.id = row[0];
    d.text = row[1];
    d.label = row[2];
    d.source = row[3];
    d.votes = split_votes(row[4]);
    if (d.id.empty()) {
      warn(warnings, where + ": missing id");
      continue;
    }
    if (d.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      warn(warnings, where + ": missing text");
      continue;
    }
    if (!d.label.empty() && !is_category(d.label)) {
      warn(warnings, where + ": unknown label \"" + d.label + "\"");
      continue;
    }
    if (d.votes.size() > 5) {
      warn(warnings, where + ": more than 5 votes");
      continue;
    }
    if (!seen_ids.insert(d.id).second) {
      warn(warnings, where + ": duplicate id \"" + d.id + "\"");
      continue;
    }
    corpus.push_back(std::move(d));
  }
  return corpus;
}

std::string dedupe_key(const std::string& text) {
  std::string cleaned = clean_text(text);
  for (char& c : cleaned) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return cleaned;
}

Corpus dedupe(const Corpus& corpus) {
  Corpus out;
  std::unordered_set<std::string> seen;
  for (const Document& d : corpus) {
    if (seen.insert(dedupe_key(d.text)).second) out.push_back(d);
  }
  return out;
}

std::vector<Document> split_long_document(const Document& doc, std::size_t max_words,
                                          std::vector<std::string>* warnings) {
  if (max_words == 0) throw DataError("split_long_document: max_words must be positive");
  if (whitespace_words(doc.text).size() <= max_words) return {doc};

  // Expand over-long sentences first so packing sees units that always fit.
  std::vector<std::string> units;
  for (const std::string& sentence : split_sentences(doc.text)) {
    std::vector<std::string> words = whitespace_words(sentence);
    if (words.size() <= max_words) {
      units.push_back(sentence);
      continue;
    }
    warn(warnings, doc.id + ": sentence of " + std::to_string(words.size()) +
                       " words exceeds " + std::to_string(max_words) +
                       ", splitting at word boundaries");
    for (std::size_t b = 0; b < words.size(); b += max_words) {
      units.push_back(join_words(words, b, std::min(words.size(), b + max_words)));
    }
  }

  std::vector<std::string> chunks;
  std::string current;
  std::size_t current_words = 0;
  for (const std::string& unit : units) {
    std::size_t n = whitespace_words(unit).size();
    if (current_words > 0 && current_words + n > max_words) {
      chunks.push_back(std::move(current));
      current.clear();
      current_words = 0;
    }
    if (!current.empty()) current += ' ';
    current += unit;
    current_words += n;
  }
  if (!current.empty()) chunks.push_back(std::move(current));

  std::vector<Document> out;
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    Document child = doc;
    child.id = doc.id + "#" + std::to_string(k + 1);
    child.text = std::move(chunks[k]);
    out.push_back(std::move(child));
  }
  return out;
}

Corpus split_long_documents(const Corpus& corpus, std::size_t max_words,
                            std::vector<std::string>* warnings) {
  Corpus out;
  for (const Document& d : corpus) {
    for (Document& child : split_long_document(d, max_words, warnings)) {
      out.push_back(std::move(child));
    }
  }
  return out;
}

std::string majority_vote(const std::vector<std::string>& votes) {
  if (votes.empty()) throw DataError("majority_vote: no votes");
  if (votes.size() > 5) throw DataError("majority_vote: more than 5 votes");
  std::map<std::string, std::size_t> tally;
  for (const std::string& v : votes) tally[v] += 1;
  std::string best;
  std::size_t best_count = 0;
  bool tied = false;
  for (const auto& [label, count] : tally) {
    if (count > best_count) {
      best = label;
      best_count = count;
      tied = false;
    } else if (count == best_count) {
      tied = true;
    }
  }
  if (tied) throw TieError("majority_vote: no strict plurality");
  return best;
}

Corpus resolve_labels(const Corpus& corpus) {
  Corpus out;
  out.reserve(corpus.size());
  for (const Document& d : corpus) {
    Document r = d;
    if (r.label.empty()) {
      if (r.votes.empty()) throw DataError("document " + r.id + ": no label and no votes");
      r.label = majority_vote(r.votes);
      if (!is_category(r.label)) {
        throw DataError("document " + r.id + ": vote winner \"" + r.label +
                        "\" is not a category");
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kValidation: return "validation";
    case Partition::kTest: return "test";
  }
  return "?";
}

SplitAssignment stratified_split(const Corpus& corpus, double train_frac, double val_frac,
                                 double test_frac, std::uint64_t seed) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw DataError("stratified_split: fractions must sum to 1");
  }
  if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0) {
    throw DataError("stratified_split: fractions must be positive");
  }
  // Group document indices by class in corpus order.
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].label.empty()) {
      throw DataError("stratified_split: document " + corpus[i].id + " is unlabeled");
    }
    by_class[corpus[i].label].push_back(i);
  }
  SplitAssignment split;
  split.counts.assign(kCategories.size(), {0, 0, 0});
  const double fracs[3] = {train_frac, val_frac, test_frac};
  for (auto& [label, indices] : by_class) {
    std::size_t cls = category_index(label);
    std::size_t n = indices.size();
    if (n < 3) {
      throw DataError("stratified_split: class \"" + label + "\" has only " +
                      std::to_string(n) + " documents");
    }
    Rng rng(stage_seed(seed, "split/" + label));
    rng.shuffle(indices);
    // Largest-remainder rounding of the three partition sizes.
    std::size_t quota[3];
    double remainder[3];
    std::size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      double exact = fracs[p] * static_cast<double>(n);
      quota[p] = static_cast<std::size_t>(exact);
      remainder[p] = exact - static_cast<double>(quota[p]);
      assigned += quota[p];
    }
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int a, int b) {
      if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
      return a < b;
    });
    for (std::size_t extra = 0; extra < n - assigned; ++extra) quota[order[extra]] += 1;

    std::size_t at = 0;
    for (int p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < quota[p]; ++k, ++at) {
        split.partition_of[corpus[indices[at]].id] = static_cast<Partition>(p);
      }
      split.counts[cls][static_cast<std::size_t>(p)] = quota[p];
    }
  }
  return split;
}

Corpus select_partition(const Corpus& corpus, const SplitAssignment& split, Partition p) {
  Corpus out;
  for (const Document& d : corpus) {
    auto it = split.partition_of.find(d.id);
    if (it == split.partition_of.end()) {
      throw DataError("select_partition: document " + d.id + " has no assignment");
    }
    if (it->second == p) out.push_back(d);
  }
  return out;
}

std::vector<double> class_weights(const std::vector<std::size_t>& train_counts) {
  if (train_counts.empty()) throw DataError("class_weights: no classes");
  std::size_t total = 0;
  for (std::size_t c : train_counts) {
    if (c == 0) throw DataError("class_weights: class with zero documents");
    total += c;
  }
  std::vector<double> w(train_counts.size());
  double k = static_cast<double>(train_counts.size());
  for (std::size_t i = 0; i < train_counts.size(); ++i) {
    w[i] = static_cast<double>(total) / (k * static_cast<double>(train_counts[i]));
  }
  return w;
}

void corpus_save_jsonl(const Corpus& corpus, const std::string& path) {
  std::string out;
  for (const Document& d : corpus) {
    nlohmann::json j;
    j["id"] = d.id;
    j["text"] = d.text;
    j["label"] = d.label;
    j["source"] = d.source;
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

Corpus corpus_load_jsonl(const std::string& path) {
  std::string buf = read_file(path);
  std::istringstream in(buf);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("text")) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed document record");
    }
    Document d;
    d.id = j["id"].get<std::string>();
    d.text = j["text"].get<std::string>();
    d.label = j.value("label", std::string());
    d.source = j.value("source", std::string());
    corpus.push_back(std::move(d));
  }
  return corpus;
}

std::vector<CategoryStats> corpus_stats(const Corpus& corpus) {
  std::vector<CategoryStats> stats(kCategories.size());
  for (std::size_t c = 0; c < kCategories.size(); ++c) stats[c].name = kCategories[c];
  for (const Document& d : corpus) {
    if (d.label.empty()) continue;
    CategoryStats& s = stats[category_index(d.label)];
    s.docs += 1;
    s.avg_chars += static_cast<double>(utf8_length(d.text));
    s.avg_words += static_cast<double>(whitespace_words(d.text).size());
    s.avg_sentences += static_cast<double>(split_sentences(d.text).size());
  }
  for (CategoryStats& s : stats) {
    if (s.docs == 0) continue;
    s.avg_chars /= static_cast<double>(s.docs);
    s.avg_words /= static_cast<double>(s.docs);
    s.avg_sentences /= static_cast<double>(s.docs);
  }
  return stats;
}

std::string stats_table_text(const std::vector<CategoryStats>& stats) {
  std::ostringstream out;
  out << "category                # docs   avg chars   avg words   avg sents\n";
  std::size_t total = 0;
  for (const CategoryStats& s : stats) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s %8zu %11.1f %11.1f %11.1f\n", s.name.c_str(),
                  s.docs, s.avg_chars, s.avg_words, s.avg_sentences);
    out << line;
    total += s.docs;
  }
  out << "total                  " << total << "\n";
  return out.str();
}

}  // namespace genfeat
