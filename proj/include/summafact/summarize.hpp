#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "summafact/backend.hpp"
#include "summafact/corpus.hpp"
#include "summafact/filter.hpp"

namespace summafact {

enum class Method { extractive, abstractive, hybrid };
enum class Stage { unrefined, refined };

const char* to_string(Method m);
const char* to_string(Stage s);
Method method_from_string(std::string_view s);
Stage stage_from_string(std::string_view s);

struct Summary {
  std::string article_id;
  Method method = Method::extractive;
  Stage stage = Stage::unrefined;
  std::string text;
  std::vector<std::size_t> provenance;  // source sentence indices, extractive only
  bool emptied_by_filter = false;
};

inline constexpr const char* kDefaultGenerationPrompt =
    "Summarize the following article in at most {n} sentences:\n\n{body}";

/// Ranks sentences by cosine similarity to the centroid of all sentence
/// embeddings, keeps the top k (ties to the earlier sentence) and emits
/// them in document order. k is capped at the sentence count.
Summary extractive_summarize(Backend& backend, const Article& article, int k);

Summary abstractive_summarize(Backend& backend, const Article& article,
                              const std::string& prompt_template = kDefaultGenerationPrompt,
                              int max_sentences = 3);

/// Concatenates the abstractive and extractive texts (abstractive first)
/// and passes the result through reduce_hallucination against the article
/// body. `outcome`, when given, receives the filter bookkeeping.
Summary hybrid_summarize(Backend& backend, const Article& article, int k,
                         double threshold = 0.5,
                         const std::string& prompt_template = kDefaultGenerationPrompt,
                         int max_sentences = 3, FilterOutcome* outcome = nullptr);

}  // namespace summafact
