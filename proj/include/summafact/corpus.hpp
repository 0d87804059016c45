#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace summafact {

/// One source document. `reference` holds the gold highlights and may be
/// empty; `body` is always pre-processed and non-empty.
struct Article {
  std::string id;
  std::string body;
  std::string reference;
};

struct SentenceList {
  std::vector<std::string> sentences;
  std::vector<std::size_t> offsets;  // byte offset of each sentence in the body

  std::size_t size() const { return sentences.size(); }
};

/// Cleans raw text: composes common Latin combining sequences, strips
/// control characters, collapses whitespace runs to single spaces and
/// trims. Idempotent. Throws validation error if nothing remains.
std::string preprocess(std::string_view raw);

/// Lenient variant for optional fields: same cleaning, empty result allowed.
std::string preprocess_allow_empty(std::string_view raw);

/// Rule-based splitter: a sentence ends at [.!?] followed by whitespace and
/// an uppercase letter (or end of text). Words on the abbreviation list
/// never end a sentence. Input must be pre-processed.
SentenceList sentence_split(std::string_view text);

/// Fixed abbreviation list shared by the splitter and the word tokenizer.
const std::vector<std::string>& abbreviation_list();

/// Reads a UTF-8 JSONL corpus ({"id","article","highlights"} per line;
/// lines starting with '#' are ignored). Errors cite 1-based line numbers.
std::vector<Article> load_corpus(const std::filesystem::path& path,
                                 std::optional<std::size_t> limit = std::nullopt);

}  // namespace summafact
