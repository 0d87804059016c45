#include "summafact/filter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "summafact/corpus.hpp"
#include "summafact/errors.hpp"
#include "summafact/util.hpp"

namespace summafact {

namespace {

bool is_word_punct(unsigned char c) { return std::ispunct(c) != 0; }

const std::unordered_set<std::string>& abbreviation_set() {
  static const std::unordered_set<std::string> set(abbreviation_list().begin(),
                                                   abbreviation_list().end());
  return set;
}

// Tries to recover an abbreviation from a whitespace-delimited chunk by
// peeling trailing punctuation one character at a time ("U.S.," -> "U.S.").
std::string match_abbreviation(std::string_view chunk) {
  std::size_t begin = 0;
  while (begin < chunk.size() && is_word_punct(static_cast<unsigned char>(chunk[begin])) &&
         chunk[begin] != '.')
    ++begin;
  std::string candidate(chunk.substr(begin));
  while (!candidate.empty()) {
    if (abbreviation_set().count(candidate) > 0) return candidate;
    if (!is_word_punct(static_cast<unsigned char>(candidate.back()))) break;
    candidate.pop_back();
  }
  return "";
}

void emit_chunk(std::string_view chunk, TokenizedText& out) {
  std::string abbrev = match_abbreviation(chunk);
  if (!abbrev.empty()) {
    out.tokens.push_back(abbrev);
    out.normalized.push_back(to_lower(abbrev));
    return;
  }
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.tokens.push_back(current);
      out.normalized.push_back(to_lower(current));
      current.clear();
    }
  };
  for (char c : chunk) {
    if (is_word_punct(static_cast<unsigned char>(c))) {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
}

}  // namespace

TokenizedText tokenize(std::string_view text) {
  TokenizedText out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) emit_chunk(text.substr(start, i - start), out);
  }
  return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw Error(ErrorKind::computation, "cosine requires equal dimensions (" +
                                            std::to_string(a.dim()) + " vs " +
                                            std::to_string(b.dim()) + ")");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na <= 0.0 || nb <= 0.0)
    throw Error(ErrorKind::computation, "cosine requires non-zero vectors");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

FilterResult reduce_hallucination(Backend& backend, const std::string& original_text,
                                  const std::string& summary, double threshold) {
  if (original_text.empty())
    throw Error(ErrorKind::precondition, "original text must be non-empty");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw Error(ErrorKind::precondition, "threshold must lie in (0, 1)");

  FilterResult result;
  result.outcome.threshold = threshold;

  TokenizedText summary_tokens = tokenize(summary);
  if (summary_tokens.size() == 0) return result;

  TokenizedText original_tokens = tokenize(original_text);

  // one embedding request per distinct normalized token per call
  std::vector<std::string> distinct;
  std::unordered_map<std::string, std::size_t> index_of;
  auto intern = [&](const std::string& tok) {
    auto [it, inserted] = index_of.try_emplace(tok, distinct.size());
    if (inserted) distinct.push_back(tok);
    return it->second;
  };
  std::vector<std::size_t> original_ids;
  original_ids.reserve(original_tokens.size());
  for (const auto& tok : original_tokens.normalized) original_ids.push_back(intern(tok));
  std::vector<std::size_t> summary_ids;
  summary_ids.reserve(summary_tokens.size());
  for (const auto& tok : summary_tokens.normalized) summary_ids.push_back(intern(tok));

  std::vector<EmbeddingVector> vectors;
  if (!distinct.empty()) vectors = backend.embed(distinct);

  // distinct original token ids, original order
  std::vector<std::size_t> original_distinct;
  {
    std::unordered_set<std::size_t> seen;
    for (std::size_t id : original_ids)
      if (seen.insert(id).second) original_distinct.push_back(id);
  }

  std::vector<std::string> kept_parts;
  for (std::size_t i = 0; i < summary_tokens.size(); ++i) {
    double max_sim = -1.0;
    for (std::size_t oid : original_distinct)
      max_sim = std::max(max_sim, cosine(vectors[summary_ids[i]], vectors[oid]));
    if (max_sim > threshold) {
      result.outcome.kept.push_back(summary_tokens.tokens[i]);
      kept_parts.push_back(summary_tokens.tokens[i]);
    } else {
      result.outcome.dropped.emplace_back(summary_tokens.tokens[i], max_sim);
    }
  }

  std::string joined;
  for (std::size_t i = 0; i < kept_parts.size(); ++i) {
    if (i > 0) joined.push_back(' ');
    joined += kept_parts[i];
  }
  result.text = std::move(joined);
  return result;
}

}  // namespace summafact
