#include <doctest.h>

#include <random>

#include "summafact/corpus.hpp"
#include "summafact/errors.hpp"
#include "test_support.hpp"

using namespace summafact;
using summafact::testing::TempDir;
using summafact::testing::write_file;

TEST_CASE("preprocess collapses whitespace and trims") {
  CHECK(preprocess("a  b\n c") == "a b c");
  CHECK(preprocess("abc") == "abc");
  CHECK(preprocess("  leading and trailing\t") == "leading and trailing");
}

TEST_CASE("preprocess rejects text that cleans to nothing") {
  CHECK_THROWS_AS(preprocess("\t\n "), Error);
  CHECK_THROWS_AS(preprocess(""), Error);
  CHECK(preprocess_allow_empty("\t\n ").empty());
}

TEST_CASE("preprocess removes control characters and composes accents") {
  CHECK(preprocess("a\x01\x02z") == "az");
  CHECK(preprocess("tab\x7f stop") == "tab stop");
  // e + combining acute becomes precomposed U+00E9
  CHECK(preprocess("caf\x65\xcc\x81") == "caf\xc3\xa9");
  // non-breaking space is whitespace
  CHECK(preprocess("a\xc2\xa0""b") == "a b");
}

TEST_CASE("preprocess is idempotent") {
  std::mt19937 rng(41);
  std::uniform_int_distribution<int> len(0, 60);
  std::uniform_int_distribution<int> pick(0, 11);
  const char* pieces[] = {"a", "B", " ", "\t", "\n", ".", "!", "é", "\x01", "  ", "e\xcc\x81", "x"};
  for (int round = 0; round < 200; ++round) {
    std::string raw;
    int n = len(rng);
    for (int i = 0; i < n; ++i) raw += pieces[pick(rng)];
    std::string once = preprocess_allow_empty(raw);
    CHECK(preprocess_allow_empty(once) == once);
  }
}

TEST_CASE("sentence_split on terminal punctuation") {
  SentenceList list = sentence_split("A cat sat. A dog ran.");
  REQUIRE(list.size() == 2);
  CHECK(list.sentences[0] == "A cat sat.");
  CHECK(list.sentences[1] == "A dog ran.");
  CHECK(list.offsets[0] == 0);
  CHECK(list.offsets[1] == 11);
}

TEST_CASE("sentence_split without boundary keeps one sentence") {
  SentenceList list = sentence_split("No punctuation here");
  REQUIRE(list.size() == 1);
  CHECK(list.sentences[0] == "No punctuation here");
}

TEST_CASE("sentence_split honors the abbreviation list") {
  SentenceList list = sentence_split("Mr. Smith left. He returned.");
  REQUIRE(list.size() == 2);
  CHECK(list.sentences[0] == "Mr. Smith left.");
  CHECK(list.sentences[1] == "He returned.");

  // every listed abbreviation suppresses the boundary
  for (const auto& abbrev : abbreviation_list()) {
    std::string text = "He cited " + abbrev + " Smith today. Then he left.";
    SentenceList l = sentence_split(text);
    CHECK(l.sentences[0].find(abbrev + " Smith") != std::string::npos);
  }
}

TEST_CASE("sentence_split handles question and exclamation runs") {
  SentenceList list = sentence_split("Really?! Yes. Sure thing!");
  REQUIRE(list.size() == 3);
  CHECK(list.sentences[0] == "Really?!");
}

TEST_CASE("sentence_split reconstruction invariant") {
  const char* texts[] = {
      "A cat sat. A dog ran.",
      "Dr. Jones spoke at 5 p.m. about the U.S. economy. Markets rose.",
      "One sentence only",
      "What?! Who said that? Nobody did.",
  };
  for (const char* text : texts) {
    SentenceList list = sentence_split(text);
    std::string joined;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i > 0) joined.push_back(' ');
      joined += list.sentences[i];
      CHECK_FALSE(list.sentences[i].empty());
      // offsets point at the sentence text inside the body
      CHECK(std::string(text).substr(list.offsets[i], list.sentences[i].size()) ==
            list.sentences[i]);
    }
    CHECK(joined == text);
  }
}

TEST_CASE("load_corpus reads records in file order") {
  TempDir dir;
  write_file(dir.file("c.jsonl"),
             R"({"id":"x1","article":"First body text.","highlights":"h1"})"
             "\n"
             R"({"id":"x2","article":"Second body text.","highlights":"h2"})"
             "\n"
             R"({"id":"x3","article":"Third body text.","highlights":"h3"})"
             "\n");
  auto articles = load_corpus(dir.file("c.jsonl"));
  REQUIRE(articles.size() == 3);
  CHECK(articles[0].id == "x1");
  CHECK(articles[1].id == "x2");
  CHECK(articles[2].id == "x3");
  CHECK(articles[0].body == "First body text.");
  CHECK(articles[0].reference == "h1");

  auto limited = load_corpus(dir.file("c.jsonl"), 1);
  REQUIRE(limited.size() == 1);
  CHECK(limited[0].id == "x1");
}

TEST_CASE("load_corpus skips comment lines and blank lines") {
  TempDir dir;
  write_file(dir.file("c.jsonl"),
             "  # header comment\n"
             "\n"
             R"({"id":"x1","article":"Body.","highlights":""})"
             "\n");
  auto articles = load_corpus(dir.file("c.jsonl"));
  REQUIRE(articles.size() == 1);
  CHECK(articles[0].reference.empty());
}

TEST_CASE("load_corpus errors cite the line number") {
  TempDir dir;
  write_file(dir.file("c.jsonl"),
             R"({"id":"x1","article":"Body one.","highlights":""})"
             "\n"
             R"({"id":"x2","highlights":"missing article"})"
             "\n");
  try {
    load_corpus(dir.file("c.jsonl"));
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("article") != std::string::npos);
  }
}

TEST_CASE("load_corpus rejects duplicate ids and empty bodies") {
  TempDir dir;
  write_file(dir.file("dup.jsonl"),
             R"({"id":"x1","article":"Body.","highlights":""})"
             "\n"
             R"({"id":"x1","article":"Other.","highlights":""})"
             "\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.file("dup.jsonl")),
                       doctest::Contains("duplicate article id"), Error);

  write_file(dir.file("empty.jsonl"), R"({"id":"x1","article":"  \t ","highlights":""})"
                                      "\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.file("empty.jsonl")),
                       doctest::Contains("empty after pre-processing"), Error);
}

TEST_CASE("load_corpus missing file is an io error") {
  try {
    load_corpus("/nonexistent/corpus.jsonl");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}

TEST_CASE("load_corpus is deterministic") {
  TempDir dir;
  std::string content = summafact::testing::fixture_corpus_jsonl(4);
  write_file(dir.file("c.jsonl"), content);
  auto first = load_corpus(dir.file("c.jsonl"));
  auto second = load_corpus(dir.file("c.jsonl"));
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].id == second[i].id);
    CHECK(first[i].body == second[i].body);
    CHECK(first[i].reference == second[i].reference);
  }
}
