#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "zskd/batch.hpp"
#include "zskd/error.hpp"
#include "zskd/rng.hpp"
#include "zskd/vocab.hpp"

using namespace zskd;

namespace {

const char* tiny_corpus_path() {
  return ZSKD_SOURCE_DIR "/data/tiny_corpus.txt";
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("pre-tokenization lowercases and splits out punctuation") {
  auto words = Vocab::pre_tokenize("The cat, Runs!");
  REQUIRE(words.size() == 5);
  CHECK(words[0] == "the");
  CHECK(words[1] == "cat");
  CHECK(words[2] == ",");
  CHECK(words[3] == "runs");
  CHECK(words[4] == "!");

  CHECK(Vocab::pre_tokenize("").empty());
  CHECK(Vocab::pre_tokenize("   \t ").empty());
  auto digits = Vocab::pre_tokenize("a1 b2");
  REQUIRE(digits.size() == 2);
  CHECK(digits[0] == "a1");
}

TEST_CASE("two-word corpus yields both words plus the reserved ids") {
  std::stringstream corpus("a b a b");
  Vocab v = build_vocab(corpus, 8, 10);
  CHECK(v.size() == 7);  // 5 reserved + the two words
  CHECK(v.token_of(kPadId) == "[PAD]");
  CHECK(v.token_of(kClsId) == "[CLS]");
  CHECK(v.token_of(kSepId) == "[SEP]");
  CHECK(v.token_of(kUnkId) == "[UNK]");

  auto a = v.encode("a");
  auto b = v.encode("b");
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK(a[0] != kUnkId);
  CHECK(b[0] != kUnkId);
  CHECK(a[0] != b[0]);

  auto atoms = v.word_atoms();
  REQUIRE(atoms.size() == 2);

  auto ids = v.encode("a b a b");
  CHECK(v.decode(ids) == "a b a b");
}

TEST_CASE("vocabulary building rejects degenerate inputs") {
  std::stringstream empty("");
  CHECK_THROWS_AS(build_vocab(empty, 64, 10), DataError);
  std::stringstream blank("   \n  \n");
  CHECK_THROWS_AS(build_vocab(blank, 64, 10), DataError);
  std::stringstream tiny("a b");
  CHECK_THROWS_AS(build_vocab(tiny, 5, 10), ParameterError);   // no room
  CHECK_THROWS_AS(build_vocab(tiny, 64, -1), ParameterError);  // bad merges
  CHECK_THROWS_AS(build_vocab_file("/nonexistent/corpus.txt", 64, 10),
                  IoError);
}

TEST_CASE("merging fuses repeated words into single tokens") {
  std::stringstream corpus(
      "the cat sees the dog\nthe dog sees the cat\n"
      "the cat and the dog\nthe dog and the cat");
  Vocab v = build_vocab(corpus, 64, 200);
  for (const char* word : {"the", "cat", "dog", "sees", "and"}) {
    auto ids = v.encode(word);
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] != kUnkId);
    CHECK(v.ends_word(ids[0]));
  }
  auto atoms = v.word_atoms();
  CHECK(atoms.size() >= 5);
}

TEST_CASE("characters the corpus never saw encode as the unknown id") {
  std::stringstream corpus("a b a b c c");
  Vocab v = build_vocab(corpus, 32, 10);
  auto ids = v.encode("@");
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == kUnkId);
  CHECK(v.id_of("no such token") == kUnkId);
  CHECK_THROWS_AS(v.token_of(-1), DataError);
  CHECK_THROWS_AS(v.token_of(v.size()), DataError);
}

TEST_CASE("round trip over a thousand sampled corpus lines") {
  Vocab v = build_vocab_file(tiny_corpus_path(), 512, 1000);

  // Collect normalized corpus lines: lowercase words joined by spaces.
  std::ifstream is(tiny_corpus_path());
  REQUIRE(is.good());
  std::vector<std::string> lines;
  std::string raw;
  while (std::getline(is, raw)) {
    auto words = Vocab::pre_tokenize(raw);
    if (words.empty()) continue;
    std::string joined;
    for (const auto& w : words) {
      if (!joined.empty()) joined += ' ';
      joined += w;
    }
    lines.push_back(joined);
  }
  REQUIRE(lines.size() >= 20);

  RngState rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const std::string& line = lines[rng.below(lines.size())];
    auto ids = v.encode(line);
    REQUIRE(!ids.empty());
    std::string back = v.decode(ids);
    CHECK(back == line);
    CHECK(v.encode(back) == ids);
  }
}

TEST_CASE("identical corpus and parameters build identical vocab files") {
  std::string p1 = temp_path("zskd_vocab_rep1.txt");
  std::string p2 = temp_path("zskd_vocab_rep2.txt");
  build_vocab_file(tiny_corpus_path(), 256, 600).save(p1);
  build_vocab_file(tiny_corpus_path(), 256, 600).save(p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(!b1.empty());
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("saved vocabularies load back with identical behavior") {
  Vocab v = build_vocab_file(tiny_corpus_path(), 256, 600);
  std::string path = temp_path("zskd_vocab_roundtrip.txt");
  v.save(path);
  Vocab loaded = Vocab::load(path);
  CHECK(loaded.size() == v.size());
  for (const char* text :
       {"the old cat sleeps near the warm window", "who keeps the garden",
        "rain falls on the quiet village"}) {
    CHECK(loaded.encode(text) == v.encode(text));
  }
  CHECK(loaded.word_atoms() == v.word_atoms());
  std::filesystem::remove(path);

  std::string bad = temp_path("zskd_vocab_bad.txt");
  {
    std::ofstream os(bad);
    os << "just some text\n";
  }
  CHECK_THROWS_AS(Vocab::load(bad), IoError);
  std::filesystem::remove(bad);
  CHECK_THROWS_AS(Vocab::load("/nonexistent/vocab.txt"), IoError);
}

TEST_CASE("experiment vocabulary covers the bundled corpus") {
  Vocab v = build_vocab_file(tiny_corpus_path(), 256, 600);
  CHECK(v.size() <= 256);
  CHECK(v.size() >= 100);

  // The structural words of the synthetic tasks must be single tokens.
  for (const char* word : {"not", "who", "where", "what", "when", "why",
                           "how"}) {
    auto ids = v.encode(word);
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] != kUnkId);
  }
  // The question mark rides on its reserved id.
  auto qm = v.encode("?");
  REQUIRE(qm.size() == 1);
  CHECK(qm[0] == kQMarkId);

  CHECK(v.word_atoms().size() >= 40);

  // Every sentence of the corpus encodes without unknowns.
  std::ifstream is(tiny_corpus_path());
  std::string line;
  while (std::getline(is, line)) {
    for (int32_t id : v.encode(line)) {
      CHECK(id != kUnkId);
    }
  }
}
