#include "summafact/summarize.hpp"

#include <algorithm>
#include <numeric>

#include "summafact/errors.hpp"
#include "summafact/util.hpp"

namespace summafact {

const char* to_string(Method m) {
  switch (m) {
    case Method::extractive: return "extractive";
    case Method::abstractive: return "abstractive";
    case Method::hybrid: return "hybrid";
  }
  return "extractive";
}

const char* to_string(Stage s) {
  return s == Stage::unrefined ? "unrefined" : "refined";
}

Method method_from_string(std::string_view s) {
  if (s == "extractive") return Method::extractive;
  if (s == "abstractive") return Method::abstractive;
  if (s == "hybrid") return Method::hybrid;
  throw Error(ErrorKind::validation, "unknown summary method: " + std::string(s));
}

Stage stage_from_string(std::string_view s) {
  if (s == "unrefined") return Stage::unrefined;
  if (s == "refined") return Stage::refined;
  throw Error(ErrorKind::validation, "unknown summary stage: " + std::string(s));
}

Summary extractive_summarize(Backend& backend, const Article& article, int k) {
  if (k < 1) throw Error(ErrorKind::precondition, "k must be >= 1");
  SentenceList sentences = sentence_split(article.body);
  if (sentences.size() == 0)
    throw Error(ErrorKind::precondition, "article has no sentences: " + article.id);

  Summary summary;
  summary.article_id = article.id;
  summary.method = Method::extractive;
  summary.stage = Stage::unrefined;

  std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), sentences.size());

  std::vector<double> scores(sentences.size(), 0.0);
  if (sentences.size() > 1) {
    std::vector<EmbeddingVector> vectors = backend.embed(sentences.sentences);
    EmbeddingVector centroid;
    centroid.values.assign(vectors.front().dim(), 0.0);
    for (const auto& v : vectors)
      for (int d = 0; d < v.dim(); ++d) centroid.values[d] += v.values[d];
    for (double& x : centroid.values) x /= static_cast<double>(vectors.size());

    if (centroid.norm() > 1e-12) {
      for (std::size_t i = 0; i < vectors.size(); ++i) scores[i] = cosine(vectors[i], centroid);
    }
    // zero centroid: all scores stay equal, selection falls back to document order
  }

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];  // ties keep earlier position first
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());

  std::string text;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0) text.push_back(' ');
    text += sentences.sentences[order[i]];
  }
  summary.text = std::move(text);
  summary.provenance = std::move(order);
  return summary;
}

Summary abstractive_summarize(Backend& backend, const Article& article,
                              const std::string& prompt_template, int max_sentences) {
  if (article.body.empty()) throw Error(ErrorKind::precondition, "article body is empty");

  std::string prompt =
      render_placeholder(prompt_template, "n", std::to_string(max_sentences));
  prompt = render_placeholder(prompt, "body", article.body);

  ChatRequest req;
  req.user = prompt;
  req.temperature = 0.0;
  ChatResponse res = backend.chat(req);

  std::string text = trim(res.text);
  if (text.empty())
    throw Error(ErrorKind::generation, "backend returned an empty summary for " + article.id);

  Summary summary;
  summary.article_id = article.id;
  summary.method = Method::abstractive;
  summary.stage = Stage::unrefined;
  summary.text = std::move(text);
  return summary;
}

Summary hybrid_summarize(Backend& backend, const Article& article, int k, double threshold,
                         const std::string& prompt_template, int max_sentences,
                         FilterOutcome* outcome) {
  Summary abstractive = abstractive_summarize(backend, article, prompt_template, max_sentences);
  Summary extractive = extractive_summarize(backend, article, k);

  std::string combined = abstractive.text + " " + extractive.text;
  FilterResult filtered = reduce_hallucination(backend, article.body, combined, threshold);
  if (outcome) *outcome = filtered.outcome;

  Summary summary;
  summary.article_id = article.id;
  summary.method = Method::hybrid;
  summary.stage = Stage::unrefined;
  summary.text = filtered.text;
  summary.emptied_by_filter = filtered.text.empty();
  return summary;
}

}  // namespace summafact
