#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "summafact/backend.hpp"

namespace summafact {

struct TokenizedText {
  std::vector<std::string> tokens;
  std::vector<std::string> normalized;  // lowercase forms, same length

  std::size_t size() const { return tokens.size(); }
};

/// Splits on whitespace and punctuation; punctuation is discarded except
/// inside abbreviations ("U.S." stays one token). Empty text gives empty
/// lists.
TokenizedText tokenize(std::string_view text);

/// dot(a,b)/(|a||b|), clamped to [-1,1]. Throws computation error on dim
/// mismatch or zero norm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct FilterOutcome {
  std::vector<std::string> kept;
  std::vector<std::pair<std::string, double>> dropped;  // (token, max similarity)
  double threshold = 0.5;
};

struct FilterResult {
  std::string text;
  FilterOutcome outcome;
};

/// Word-level similarity filter: a summary token survives iff its best
/// cosine against any original-text token exceeds `threshold`. Embeddings
/// are requested on normalized forms, each distinct token once per call.
FilterResult reduce_hallucination(Backend& backend, const std::string& original_text,
                                  const std::string& summary, double threshold = 0.5);

}  // namespace summafact
