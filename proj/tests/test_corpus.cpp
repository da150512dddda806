#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "genfeat/corpus.hpp"
#include "genfeat/errors.hpp"
#include "genfeat/fileio.hpp"
#include "genfeat/rng.hpp"

using namespace genfeat;

namespace {

std::string write_csv(const std::string& body) {
  std::string path = "/tmp/genfeat_corpus_test.csv";
  write_file_atomic(path, body);
  return path;
}

Document doc(const std::string& id, const std::string& text, const std::string& label) {
  Document d;
  d.id = id;
  d.text = text;
  d.label = label;
  return d;
}

// A sentence of `w` words ending in a danda.
std::string sentence(std::size_t w, const std::string& word = "কথা") {
  std::string s;
  for (std::size_t i = 0; i < w; ++i) {
    if (i) s += ' ';
    s += word;
  }
  s += "।";
  return s;
}

}  // namespace

TEST_CASE("csv parsing handles quotes, embedded separators, and crlf") {
  auto rows = parse_csv("a,b\n\"x,y\",\"line1\nline2\"\r\n\"he said \"\"hi\"\"\",z\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"a", "b"});
  CHECK(rows[1] == std::vector<std::string>{"x,y", "line1\nline2"});
  CHECK(rows[2] == std::vector<std::string>{"he said \"hi\"", "z"});
  CHECK_THROWS_AS(parse_csv("\"unterminated"), DataError);
  CHECK(parse_csv("last,row").size() == 1);  // no trailing newline
}

TEST_CASE("ingest accepts good rows and reports bad ones with line numbers") {
  std::vector<std::string> warnings;
  std::string path = write_csv(
      "id,text,label,source,votes\n"
      "d1,ভাল খবর আজ,Sports,example.com,\n"
      "d2,অর্থনীতি নিয়ে লেখা,,example.com,Economics;Economics;Sports\n"
      "d3,,Sports,example.com,\n"
      "d4,short,BadLabel,example.com,\n"
      "d5,text only\n"
      "d1,নকল,Sports,example.com,\n");
  Corpus c = ingest_csv(path, &warnings);
  REQUIRE(c.size() == 2);
  CHECK(c[0].id == "d1");
  CHECK(c[0].label == "Sports");
  CHECK(c[1].id == "d2");
  CHECK(c[1].label.empty());
  CHECK(c[1].votes == std::vector<std::string>{"Economics", "Economics", "Sports"});
  REQUIRE(warnings.size() == 4);
  CHECK(warnings[0].find("row 4") != std::string::npos);  // missing text
  CHECK(warnings[1].find("row 5") != std::string::npos);  // unknown label
  CHECK(warnings[2].find("row 6") != std::string::npos);  // field count
  CHECK(warnings[3].find("duplicate id") != std::string::npos);
}

TEST_CASE("ingest of an empty file warns and returns nothing") {
  std::vector<std::string> warnings;
  Corpus c = ingest_csv(write_csv(""), &warnings);
  CHECK(c.empty());
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("empty") != std::string::npos);
  CHECK_THROWS_AS(ingest_csv(write_csv("wrong,header\n")), DataError);
}

TEST_CASE("dedupe keeps the earliest of each normalized text") {
  Corpus c = {
      doc("a", "ভাল খবর আজ", "Sports"),
      doc("b", "ভাল খবর আজ", "Sports"),          // byte-identical
      doc("c", "ভাল, খবর... আজ!!", "Sports"),    // punctuation only
      doc("d", "  ভাল   খবর আজ ", "Sports"),     // whitespace only
      doc("e", "Hello World", "Sports"),
      doc("f", "hello world", "Sports"),          // case only
      doc("g", "অন্য খবর", "Sports"),
  };
  Corpus d = dedupe(c);
  REQUIRE(d.size() == 3);
  CHECK(d[0].id == "a");
  CHECK(d[1].id == "e");
  CHECK(d[2].id == "g");
  // Idempotent and never growing.
  Corpus dd = dedupe(d);
  CHECK(dd.size() == d.size());
  Corpus distinct = {doc("x", "এক", ""), doc("y", "দুই", "")};
  CHECK(dedupe(distinct).size() == 2);
}

TEST_CASE("short documents pass through splitting unchanged") {
  Document d = doc("news-1", sentence(50) + " " + sentence(60), "Sports");
  auto out = split_long_document(d, 200);
  REQUIRE(out.size() == 1);
  CHECK(out[0].id == "news-1");  // no child suffix
  CHECK(out[0].text == d.text);
}

TEST_CASE("long documents pack greedily at sentence boundaries") {
  // 45 sentences of 10 words: chunks of 200, 200, 50 words.
  std::string text;
  for (int i = 0; i < 45; ++i) {
    if (i) text += ' ';
    text += sentence(10);
  }
  Document d = doc("doc7", text, "Economics");
  auto out = split_long_document(d, 200);
  REQUIRE(out.size() == 3);
  CHECK(out[0].id == "doc7#1");
  CHECK(out[1].id == "doc7#2");
  CHECK(out[2].id == "doc7#3");
  auto words = [](const std::string& s) {
    std::size_t n = 0;
    bool in = false;
    for (char ch : s) {
      bool sp = ch == ' ';
      if (!sp && !in) n += 1;
      in = !sp;
    }
    return n;
  };
  CHECK(words(out[0].text) == 200);
  CHECK(words(out[1].text) == 200);
  CHECK(words(out[2].text) == 50);
  for (const auto& child : out) CHECK(child.label == "Economics");

  // Concatenation, modulo boundary whitespace, reproduces the original.
  std::string joined;
  for (const auto& child : out) {
    if (!joined.empty()) joined += ' ';
    joined += child.text;
  }
  CHECK(joined == text);
}

TEST_CASE("oversized single sentences hard-split with a warning") {
  std::vector<std::string> warnings;
  Document d = doc("big", sentence(30), "Sports");  // one 30-word sentence
  auto out = split_long_document(d, 12, &warnings);
  REQUIRE(out.size() == 3);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("big") != std::string::npos);
  std::string joined;
  for (const auto& child : out) {
    if (!joined.empty()) joined += ' ';
    joined += child.text;
  }
  CHECK(joined == d.text);
}

TEST_CASE("majority vote needs a strict plurality") {
  CHECK(majority_vote({"A", "A", "A", "B", "C"}) == "A");
  CHECK(majority_vote({"A"}) == "A");
  CHECK_THROWS_AS(majority_vote({"A", "A", "B", "B", "C"}), TieError);
  CHECK_THROWS_AS(majority_vote({}), DataError);
  CHECK_THROWS_AS(majority_vote({"A", "A", "B", "B", "C", "C"}), DataError);  // > 5 votes
  // Permutation invariance.
  std::vector<std::string> votes = {"B", "A", "B", "A", "B"};
  std::sort(votes.begin(), votes.end());
  do {
    CHECK(majority_vote(votes) == "B");
  } while (std::next_permutation(votes.begin(), votes.end()));
}

TEST_CASE("label resolution applies votes only to unlabeled documents") {
  Corpus c = {
      doc("a", "x", "Sports"),
      doc("b", "y", ""),
  };
  c[1].votes = {"Economics", "Economics", "Entertainment"};
  Corpus r = resolve_labels(c);
  CHECK(r[0].label == "Sports");
  CHECK(r[1].label == "Economics");
  Corpus bad = {doc("c", "z", "")};
  CHECK_THROWS_AS(resolve_labels(bad), DataError);
}

TEST_CASE("stratified split hits the documented partition sizes") {
  // Class counts 50/30/20: train 35/21/14, val 5/3/2, test 10/6/4.
  Corpus c;
  auto add = [&](const char* label, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      c.push_back(doc(std::string(label) + std::to_string(i), "text", label));
    }
  };
  add("Sports", 50);
  add("Economics", 30);
  add("Entertainment", 20);
  SplitAssignment s = stratified_split(c, 0.7, 0.1, 0.2, 99);

  CHECK(s.counts[category_index("Sports")] == std::array<std::size_t, 3>{35, 5, 10});
  CHECK(s.counts[category_index("Economics")] == std::array<std::size_t, 3>{21, 3, 6});
  CHECK(s.counts[category_index("Entertainment")] == std::array<std::size_t, 3>{14, 2, 4});

  // Disjoint and exhaustive.
  CHECK(s.partition_of.size() == c.size());
  std::size_t train = select_partition(c, s, Partition::kTrain).size();
  std::size_t val = select_partition(c, s, Partition::kValidation).size();
  std::size_t test = select_partition(c, s, Partition::kTest).size();
  CHECK(train + val + test == c.size());
  CHECK(train == 70);
  CHECK(val == 10);
  CHECK(test == 20);

  // Same seed reproduces the assignment; a different seed moves something.
  SplitAssignment s2 = stratified_split(c, 0.7, 0.1, 0.2, 99);
  CHECK(s2.partition_of == s.partition_of);
  SplitAssignment s3 = stratified_split(c, 0.7, 0.1, 0.2, 100);
  CHECK(s3.partition_of != s.partition_of);
}

TEST_CASE("stratified split proportions stay within one document of target") {
  Rng rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    Corpus c;
    std::size_t classes = 2 + rng.index(6);
    for (std::size_t cls = 0; cls < classes; ++cls) {
      std::size_t n = 3 + rng.index(40);
      for (std::size_t i = 0; i < n; ++i) {
        c.push_back(doc(std::string(kCategories[cls]) + "/" + std::to_string(i), "t",
                        kCategories[cls]));
      }
    }
    SplitAssignment s = stratified_split(c, 0.7, 0.1, 0.2, rng.next_u64());
    const double fracs[3] = {0.7, 0.1, 0.2};
    for (std::size_t cls = 0; cls < classes; ++cls) {
      std::size_t n = s.counts[cls][0] + s.counts[cls][1] + s.counts[cls][2];
      for (int p = 0; p < 3; ++p) {
        double target = fracs[p] * static_cast<double>(n);
        CHECK(std::abs(static_cast<double>(s.counts[cls][p]) - target) <= 1.0);
      }
    }
  }
}

TEST_CASE("stratified split input validation") {
  Corpus tiny = {doc("a", "x", "Sports"), doc("b", "y", "Sports")};
  CHECK_THROWS_AS(stratified_split(tiny, 0.7, 0.1, 0.2, 1), DataError);
  Corpus unlabeled = {doc("a", "x", ""), doc("b", "y", ""), doc("c", "z", "")};
  CHECK_THROWS_AS(stratified_split(unlabeled, 0.7, 0.1, 0.2, 1), DataError);
  Corpus ok = {doc("a", "x", "Sports"), doc("b", "y", "Sports"), doc("c", "z", "Sports")};
  CHECK_THROWS_AS(stratified_split(ok, 0.5, 0.2, 0.2, 1), DataError);  // sums to 0.9
}

TEST_CASE("class weights follow the balanced formula") {
  auto w = class_weights({10, 10, 20});
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // Sum n_c * w_c = N.
  double sum = 10 * w[0] + 10 * w[1] + 20 * w[2];
  CHECK(sum == doctest::Approx(40.0).epsilon(1e-12));

  auto uniform = class_weights({7, 7, 7, 7});
  for (double v : uniform) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(class_weights({5, 0}), DataError);
  CHECK_THROWS_AS(class_weights({}), DataError);
}

TEST_CASE("corpus jsonl round trip") {
  Corpus c = {doc("a#1", "টেক্সট \"quoted\"", "Sports"), doc("b", "অন্য লেখা", "Economics")};
  c[0].source = "example.com";
  std::string path = "/tmp/genfeat_corpus_rt.jsonl";
  corpus_save_jsonl(c, path);
  Corpus r = corpus_load_jsonl(path);
  REQUIRE(r.size() == 2);
  CHECK(r[0].id == "a#1");
  CHECK(r[0].text == c[0].text);
  CHECK(r[0].label == "Sports");
  CHECK(r[0].source == "example.com");
  CHECK(r[1].label == "Economics");
  write_file_atomic(path, "{\"id\":\"x\"}\n");
  CHECK_THROWS_AS(corpus_load_jsonl(path), DataError);
}

TEST_CASE("corpus statistics average per category") {
  Corpus c = {
      doc("a", "এক দুই তিন। চার পাঁচ?", "Sports"),       // 5 words, 2 sentences
      doc("b", "ছয় সাত। আট। নয়!", "Sports"),            // 4 words, 3 sentences
      doc("c", "single", "Economics"),                     // 1 word, 1 sentence
  };
  auto stats = corpus_stats(c);
  const CategoryStats& sports = stats[category_index("Sports")];
  CHECK(sports.docs == 2);
  CHECK(sports.avg_words == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(sports.avg_sentences == doctest::Approx(2.5).epsilon(1e-12));
  const CategoryStats& econ = stats[category_index("Economics")];
  CHECK(econ.docs == 1);
  CHECK(econ.avg_words == doctest::Approx(1.0));
  std::string table = stats_table_text(stats);
  CHECK(table.find("Sports") != std::string::npos);
  CHECK(table.find("Govt. & Politics") != std::string::npos);
}
