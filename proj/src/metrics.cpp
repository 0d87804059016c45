#include "summafact/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <set>

#include "summafact/errors.hpp"
#include "summafact/filter.hpp"
#include "summafact/util.hpp"

namespace summafact {

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"factsumm", "qags",   "rouge1", "rouge2",
                                                 "rougeL",   "summac", "gpt"};
  return names;
}

bool is_metric_name(std::string_view name) {
  const auto& names = metric_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

// ---------------------------------------------------------------------------
// ROUGE
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> rouge_tokens(std::string_view text) {
  return tokenize(text).normalized;
}

std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (int k = 1; k < n; ++k) {
      gram.push_back(' ');
      gram += tokens[i + k];
    }
    counts[gram] += 1;
  }
  return counts;
}

RougeScore prf(double overlap, double candidate_total, double reference_total) {
  RougeScore score;
  if (candidate_total > 0) score.precision = overlap / candidate_total;
  if (reference_total > 0) score.recall = overlap / reference_total;
  if (score.precision + score.recall > 0)
    score.f1 = 2 * score.precision * score.recall / (score.precision + score.recall);
  return score;
}

}  // namespace

RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  if (n != 1 && n != 2) throw Error(ErrorKind::precondition, "rouge_n supports n in {1, 2}");
  std::vector<std::string> cand = rouge_tokens(candidate);
  std::vector<std::string> ref = rouge_tokens(reference);
  std::map<std::string, int> cand_grams = ngram_counts(cand, n);
  std::map<std::string, int> ref_grams = ngram_counts(ref, n);

  double cand_total = 0;
  for (const auto& [gram, count] : cand_grams) cand_total += count;
  double ref_total = 0;
  for (const auto& [gram, count] : ref_grams) ref_total += count;

  // clipped overlap: min of the two counts per gram
  double overlap = 0;
  for (const auto& [gram, count] : cand_grams) {
    auto it = ref_grams.find(gram);
    if (it != ref_grams.end()) overlap += std::min(count, it->second);
  }
  return prf(overlap, cand_total, ref_total);
}

namespace {

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        row[j] = prev[j - 1] + 1;
      else
        row[j] = std::max(prev[j], row[j - 1]);
    }
    std::swap(prev, row);
  }
  return prev[b.size()];
}

}  // namespace

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  std::vector<std::string> cand = rouge_tokens(candidate);
  std::vector<std::string> ref = rouge_tokens(reference);
  double lcs = static_cast<double>(lcs_length(cand, ref));
  return prf(lcs, static_cast<double>(cand.size()), static_cast<double>(ref.size()));
}

double token_f1(std::string_view a, std::string_view b) { return rouge_n(a, b, 1).f1; }

// ---------------------------------------------------------------------------
// Prompt-mediated metrics
// ---------------------------------------------------------------------------

MetricPrompts MetricPrompts::defaults() {
  MetricPrompts prompts;
  prompts.qags_generate =
      "Write up to {n} short factoid questions that can be answered from the text below. "
      "Write one question per line and nothing else.\n\nText:\n{summary}";
  prompts.qags_answer =
      "Answer the question using only the text below. Reply with the shortest possible answer. "
      "If the text does not contain the answer, reply exactly: unanswerable\n\n"
      "Text:\n{text}\n\nQuestion:\n{question}\n\nAnswer:";
  prompts.factsumm_extract =
      "List the factual relation triples contained in the text below. Output one JSON object "
      "per line, each of the form {\"subject\": \"...\", \"relation\": \"...\", "
      "\"object\": \"...\"}. Output NONE if there are none.\n\nText:\n{text}";
  prompts.summac_entail =
      "Premise:\n{premise}\n\nHypothesis:\n{hypothesis}\n\nOn a scale from 0 to 1, how strongly "
      "does the premise entail the hypothesis? Reply with a single number and nothing else.";
  return prompts;
}

RougeAgainst rouge_against_from_string(std::string_view s) {
  if (s == "reference") return RougeAgainst::reference;
  if (s == "article") return RougeAgainst::article;
  throw Error(ErrorKind::configuration, "rouge_against must be \"reference\" or \"article\"");
}

MetricSuite::MetricSuite(Backend& backend, Refiner& refiner, MetricPrompts prompts,
                         int num_questions)
    : backend_(backend), refiner_(refiner), prompts_(std::move(prompts)),
      num_questions_(num_questions) {
  if (num_questions_ < 1)
    throw Error(ErrorKind::precondition, "num_questions must be >= 1");
}

double MetricSuite::gpt_metric(const Article& article, std::string_view summary_text,
                               nlohmann::json* details) {
  int raw = 0;
  try {
    raw = refiner_.score_hallucination(article, summary_text);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::parse) throw;
    throw Error(ErrorKind::metric_unavailable, e.what());
  }
  if (details) (*details)["raw_score"] = raw;
  return (raw - 1) / 9.0;
}

namespace {

std::string chat_once(Backend& backend, std::string prompt) {
  ChatRequest req;
  req.user = std::move(prompt);
  req.temperature = 0.0;
  return backend.chat(req).text;
}

// strips "1.", "2)", "-", "*" list prefixes
std::string strip_list_prefix(std::string_view line) {
  static const std::regex prefix(R"(^\s*(?:\d+[.)]|[-*])\s*)");
  std::string s(line);
  return std::regex_replace(s, prefix, "");
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.emplace_back(text.substr(start, end - start));
    start = end + 1;
    if (end == text.size()) break;
  }
  return lines;
}

std::optional<double> parse_probability(std::string_view reply) {
  static const std::regex number(R"(\d+(?:\.\d+)?|\.\d+)");
  std::string s(reply);
  std::smatch m;
  if (!std::regex_search(s, m, number)) return std::nullopt;
  double value = std::stod(m.str());
  return std::clamp(value, 0.0, 1.0);
}

std::string normalize_field(std::string_view s) { return collapse_whitespace(to_lower(s)); }

}  // namespace

std::vector<std::string> MetricSuite::generate_questions(std::string_view summary_text) {
  std::string prompt =
      render_placeholder(prompts_.qags_generate, "n", std::to_string(num_questions_));
  prompt = render_placeholder(prompt, "summary", summary_text);
  std::string reply = chat_once(backend_, prompt);

  std::vector<std::string> questions;
  for (const auto& line : split_lines(reply)) {
    std::string q = trim(strip_list_prefix(line));
    if (q.empty() || q == "NONE") continue;
    questions.push_back(std::move(q));
    if (static_cast<int>(questions.size()) >= num_questions_) break;
  }
  return questions;
}

std::string MetricSuite::answer(std::string_view context, std::string_view question) {
  std::string prompt = render_placeholder(prompts_.qags_answer, "text", context);
  prompt = render_placeholder(prompt, "question", question);
  return trim(chat_once(backend_, prompt));
}

double MetricSuite::qags_metric(const Article& article, std::string_view summary_text,
                                nlohmann::json* details) {
  std::vector<std::string> questions;
  try {
    questions = generate_questions(summary_text);
  } catch (const Error& e) {
    throw Error(ErrorKind::metric_unavailable, e.what());
  }
  if (questions.empty())
    throw Error(ErrorKind::metric_unavailable, "no questions generated from summary");

  nlohmann::json per_question = nlohmann::json::array();
  double total = 0.0;
  try {
    for (const auto& question : questions) {
      std::string from_article = answer(article.body, question);
      std::string from_summary = answer(summary_text, question);
      double score = (to_lower(from_article) == "unanswerable")
                         ? 0.0
                         : token_f1(from_summary, from_article);
      total += score;
      per_question.push_back({{"question", question},
                              {"article_answer", from_article},
                              {"summary_answer", from_summary},
                              {"score", round_to(score)}});
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::metric_unavailable, e.what());
  }
  if (details) (*details)["questions"] = per_question;
  return total / static_cast<double>(questions.size());
}

std::vector<Triple> MetricSuite::extract_triples(std::string_view text) {
  std::string prompt = render_placeholder(prompts_.factsumm_extract, "text", text);

  auto parse_reply = [](const std::string& reply, std::vector<Triple>* out) -> bool {
    out->clear();
    for (const auto& line : split_lines(reply)) {
      std::string stripped = trim(line);
      if (stripped.empty() || stripped == "NONE") continue;
      nlohmann::json j = nlohmann::json::parse(stripped, nullptr, false);
      if (j.is_discarded() || !j.is_object()) return false;
      Triple t;
      t.subject = normalize_field(j.value("subject", ""));
      t.relation = normalize_field(j.value("relation", ""));
      t.object = normalize_field(j.value("object", ""));
      if (t.subject.empty() || t.relation.empty() || t.object.empty()) return false;
      out->push_back(std::move(t));
    }
    return true;
  };

  std::vector<Triple> triples;
  std::string reply = chat_once(backend_, prompt);
  if (parse_reply(reply, &triples)) return triples;
  reply = chat_once(backend_, prompt);  // one re-ask
  if (parse_reply(reply, &triples)) return triples;
  throw Error(ErrorKind::metric_unavailable,
              "unparseable triple output: \"" + reply.substr(0, 48) + "\"");
}

double MetricSuite::factsumm_metric(const Article& article, std::string_view summary_text,
                                    nlohmann::json* details) {
  std::vector<Triple> article_triples;
  std::vector<Triple> summary_triples;
  try {
    article_triples = extract_triples(article.body);
    summary_triples = extract_triples(summary_text);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::metric_unavailable) throw;
    throw Error(ErrorKind::metric_unavailable, e.what());
  }

  if (details) {
    (*details)["article_triples"] = article_triples.size();
    (*details)["summary_triples"] = summary_triples.size();
  }
  if (summary_triples.empty()) {
    // no facts asserted, so none are unsupported
    if (details) (*details)["vacuous"] = true;
    return 1.0;
  }

  std::set<Triple> support(article_triples.begin(), article_triples.end());
  std::size_t matched = 0;
  for (const auto& t : summary_triples)
    if (support.count(t) > 0) ++matched;
  if (details) (*details)["matched"] = matched;
  return static_cast<double>(matched) / static_cast<double>(summary_triples.size());
}

double MetricSuite::summac_metric(const Article& article, std::string_view summary_text,
                                  nlohmann::json* details) {
  SentenceList article_sentences = sentence_split(article.body);
  std::string cleaned = preprocess_allow_empty(summary_text);
  if (cleaned.empty())
    throw Error(ErrorKind::metric_unavailable, "summary has no sentences to score");
  SentenceList summary_sentences = sentence_split(cleaned);

  auto entailment = [&](const std::string& premise, const std::string& hypothesis) -> double {
    std::string prompt = render_placeholder(prompts_.summac_entail, "premise", premise);
    prompt = render_placeholder(prompt, "hypothesis", hypothesis);
    std::string reply = chat_once(backend_, prompt);
    auto p = parse_probability(reply);
    if (!p) {
      reply = chat_once(backend_, prompt);  // one re-ask
      p = parse_probability(reply);
    }
    if (!p)
      throw Error(ErrorKind::metric_unavailable,
                  "unparseable entailment probability: \"" + reply.substr(0, 48) + "\"");
    return *p;
  };

  nlohmann::json maxima = nlohmann::json::array();
  double total = 0.0;
  for (const auto& hypothesis : summary_sentences.sentences) {
    double best = 0.0;
    for (const auto& premise : article_sentences.sentences)
      best = std::max(best, entailment(premise, hypothesis));
    maxima.push_back(round_to(best));
    total += best;
  }
  if (details) (*details)["sentence_maxima"] = maxima;
  return total / static_cast<double>(summary_sentences.size());
}

ScoreCard MetricSuite::evaluate_all(const Article& article, const Summary& summary,
                                    const std::set<std::string>& enabled, RougeAgainst against) {
  if (enabled.empty())
    throw Error(ErrorKind::precondition, "at least one metric must be enabled");
  for (const auto& name : enabled)
    if (!is_metric_name(name))
      throw Error(ErrorKind::precondition, "unknown metric: " + name);

  ScoreCard card;
  card.article_id = article.id;
  card.method = summary.method;
  card.stage = summary.stage;

  const std::string& rouge_ref =
      (against == RougeAgainst::reference) ? article.reference : article.body;

  auto run = [&](const std::string& name, auto&& fn) {
    if (enabled.count(name) == 0) return;
    nlohmann::json detail = nlohmann::json::object();
    try {
      double value = fn(&detail);
      card.scores[name] = std::clamp(value, 0.0, 1.0);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::metric_unavailable) throw;
      detail["unavailable"] = std::string(e.what());
    }
    if (!detail.empty()) card.details[name] = std::move(detail);
  };

  run("factsumm",
      [&](nlohmann::json* d) { return factsumm_metric(article, summary.text, d); });
  run("qags", [&](nlohmann::json* d) { return qags_metric(article, summary.text, d); });
  run("rouge1", [&](nlohmann::json* d) {
    RougeScore s = rouge_n(summary.text, rouge_ref, 1);
    (*d)["precision"] = round_to(s.precision);
    (*d)["recall"] = round_to(s.recall);
    return s.f1;
  });
  run("rouge2", [&](nlohmann::json* d) {
    RougeScore s = rouge_n(summary.text, rouge_ref, 2);
    (*d)["precision"] = round_to(s.precision);
    (*d)["recall"] = round_to(s.recall);
    return s.f1;
  });
  run("rougeL", [&](nlohmann::json* d) {
    RougeScore s = rouge_l(summary.text, rouge_ref);
    (*d)["precision"] = round_to(s.precision);
    (*d)["recall"] = round_to(s.recall);
    return s.f1;
  });
  run("summac", [&](nlohmann::json* d) { return summac_metric(article, summary.text, d); });
  run("gpt", [&](nlohmann::json* d) { return gpt_metric(article, summary.text, d); });
  return card;
}

}  // namespace summafact
