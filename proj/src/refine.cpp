#include "summafact/refine.hpp"

#include <cctype>
#include <functional>

#include "summafact/errors.hpp"
#include "summafact/util.hpp"

namespace summafact {

namespace {

constexpr const char* kArticleSummaryBlock = "\n\nArticle:\n{article}\n\nSummary:\n{summary}\n\n";

}  // namespace

PromptCatalog PromptCatalog::defaults() {
  PromptCatalog catalog;
  catalog.basic_validation =
      "Please determine whether the provided summary can be classified as 'hallucinated' or not "
      "by matching it with the appropriate article. Note that, 'hallucination' refers to a "
      "summary that is linguistically logical but contains details that are either not mentioned "
      "in the article or are factually inaccurate." +
      std::string(kArticleSummaryBlock) + "Answer (yes or no):";
  catalog.detailed_analysis =
      "Please determine whether the provided summary can be classified as 'hallucinated' or not "
      "by matching it with the appropriate article. Note that, 'hallucination' refers to a "
      "summary that is linguistically logical but contains details that are either not mentioned "
      "in the article or are factually inaccurate." +
      std::string(kArticleSummaryBlock) +
      "Explain your reasoning step by step then answer the question (yes or no):";
  catalog.scoring =
      "Score the following summary by the given corresponding article with respect to "
      "'hallucination' from 1 to 10. Note that in this context, 'hallucination' refers to a "
      "summary that is linguistically logical but contains details that are either not mentioned "
      "in the article or are factually inaccurate. 10 points indicates that the summary is not "
      "hallucinated at all and 1 point indicates that the summary is fully hallucinated." +
      std::string(kArticleSummaryBlock) + "Points:";
  catalog.refinement =
      "Refine the summary and reduce 'hallucination' and try to achieve the score of 10 out of "
      "10 for each summary. Note that in this context, 'hallucination' refers to a summary that "
      "is linguistically logical but contains details that are either not mentioned in the "
      "article or are factually inaccurate." +
      std::string(kArticleSummaryBlock) + "Refined Summary:";
  catalog.final_verification =
      "Final Verification: Re-evaluate the refined summaries to confirm the reduction of "
      "hallucinations. Repeat the evaluation process for the refined summaries to ensure that "
      "they meet the desired criteria of minimal hallucinations. A final round of evaluation "
      "confirms the effectiveness of the refinements in reducing hallucinations. Note that, "
      "'hallucination' refers to a summary that is linguistically logical but contains details "
      "that are either not mentioned in the article or are factually inaccurate." +
      std::string(kArticleSummaryBlock) + "Answer (yes or no):";
  return catalog;
}

void PromptCatalog::validate() const {
  auto check = [](const std::string& tmpl, const char* name) {
    if (tmpl.find(kHallucinationDefinition) == std::string::npos)
      throw Error(ErrorKind::configuration,
                  std::string(name) + " template must contain the hallucination definition");
    if (tmpl.find("{article}") == std::string::npos ||
        tmpl.find("{summary}") == std::string::npos)
      throw Error(ErrorKind::configuration, std::string(name) +
                                                " template must contain {article} and {summary}");
  };
  check(basic_validation, "basic_validation");
  check(detailed_analysis, "detailed_analysis");
  check(scoring, "scoring");
  check(refinement, "refinement");
  check(final_verification, "final_verification");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::target_reached: return "target_reached";
    case Termination::max_iters: return "max_iters";
    case Termination::parse_failure: return "parse_failure";
  }
  return "target_reached";
}

std::size_t RefinementTrace::implied_chat_calls() const {
  std::size_t calls = 0;
  for (const auto& it : iterations) {
    if (it.basic) calls += 1;
    if (it.detailed) calls += 1;
    if (it.score_raw) calls += 1;
    if (it.refined_via_chat) calls += 1;
  }
  if (verification.verdict) calls += 1;
  if (verification.score) calls += 1;
  return calls + static_cast<std::size_t>(extra_calls);
}

std::string render_prompt(std::string_view tmpl, std::string_view article_body,
                          std::string_view summary_text) {
  std::string out = render_placeholder(tmpl, "article", article_body);
  return render_placeholder(out, "summary", summary_text);
}

// ---------------------------------------------------------------------------
// reply parsing
// ---------------------------------------------------------------------------

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

struct WordHit {
  bool value = false;
  std::size_t offset = 0;
};

std::vector<WordHit> yes_no_tokens(std::string_view reply) {
  std::vector<WordHit> hits;
  std::size_t i = 0;
  while (i < reply.size()) {
    if (!is_alpha(reply[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < reply.size() && is_alpha(reply[i])) ++i;
    std::string word = to_lower(reply.substr(start, i - start));
    if (word == "yes") hits.push_back({true, start});
    if (word == "no") hits.push_back({false, start});
  }
  return hits;
}

}  // namespace

std::optional<bool> parse_yes_no_first(std::string_view reply) {
  auto hits = yes_no_tokens(reply);
  if (hits.empty()) return std::nullopt;
  return hits.front().value;
}

std::optional<bool> parse_yes_no_last(std::string_view reply, std::size_t* reasoning_end) {
  auto hits = yes_no_tokens(reply);
  if (hits.empty()) return std::nullopt;
  if (reasoning_end) *reasoning_end = hits.back().offset;
  return hits.back().value;
}

std::optional<int> parse_score(std::string_view reply, bool* clamped) {
  std::optional<int> first_any;
  std::size_t i = 0;
  while (i < reply.size()) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i]))) ++i;
    int value = 0;
    for (std::size_t k = start; k < i; ++k) {
      value = value * 10 + (reply[k] - '0');
      if (value > 1000) break;  // avoid overflow on absurd digit runs
    }
    if (value >= 1 && value <= 10) {
      if (clamped) *clamped = false;
      return value;
    }
    if (!first_any) first_any = value;
  }
  if (first_any) {
    if (clamped) *clamped = true;
    return std::clamp(*first_any, 1, 10);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Refiner
// ---------------------------------------------------------------------------

Refiner::Refiner(Backend& backend, PromptCatalog catalog, int reask_attempts)
    : backend_(backend), catalog_(std::move(catalog)), reask_attempts_(reask_attempts) {
  catalog_.validate();
}

std::string Refiner::ask(const std::string& prompt) {
  ChatRequest req;
  req.user = prompt;
  req.temperature = 0.0;
  return backend_.chat(req).text;
}

std::string Refiner::ask_reparse(const std::string& prompt,
                                 const std::function<bool(const std::string&)>& accept) {
  std::string reply = ask(prompt);
  for (int attempt = 0; attempt < reask_attempts_ && !accept(reply); ++attempt) {
    reply = ask(prompt);
    loop_reasks_ += 1;
  }
  return reply;
}

Verdict Refiner::validate_basic(const Article& article, std::string_view summary_text) {
  std::string prompt = render_prompt(catalog_.basic_validation, article.body, summary_text);
  std::string reply = ask_reparse(
      prompt, [](const std::string& r) { return parse_yes_no_first(r).has_value(); });
  auto parsed = parse_yes_no_first(reply);
  if (!parsed)
    throw Error(ErrorKind::parse, "no yes/no answer in reply: \"" + reply.substr(0, 48) + "\"");
  return Verdict{*parsed, std::nullopt};
}

Verdict Refiner::validate_detailed(const Article& article, std::string_view summary_text) {
  std::string prompt = render_prompt(catalog_.detailed_analysis, article.body, summary_text);
  std::string reply = ask_reparse(
      prompt, [](const std::string& r) { return parse_yes_no_last(r).has_value(); });
  std::size_t reasoning_end = 0;
  auto parsed = parse_yes_no_last(reply, &reasoning_end);
  if (!parsed)
    throw Error(ErrorKind::parse, "no yes/no answer in reply: \"" + reply.substr(0, 48) + "\"");
  Verdict verdict{*parsed, std::nullopt};
  std::string reasoning = trim(reply.substr(0, reasoning_end));
  verdict.reasoning = reasoning;
  return verdict;
}

int Refiner::score_hallucination(const Article& article, std::string_view summary_text,
                                 bool* clamped) {
  std::string prompt = render_prompt(catalog_.scoring, article.body, summary_text);
  std::string reply = ask_reparse(
      prompt, [](const std::string& r) { return parse_score(r).has_value(); });
  auto parsed = parse_score(reply, clamped);
  if (!parsed)
    throw Error(ErrorKind::parse, "no score in reply: \"" + reply.substr(0, 48) + "\"");
  return *parsed;
}

std::string Refiner::refine_once(const Article& article, std::string_view text) {
  std::string prompt = render_prompt(catalog_.refinement, article.body, text);
  std::string reply = trim(ask(prompt));
  if (reply.size() >= 2 &&
      ((reply.front() == '"' && reply.back() == '"') ||
       (reply.front() == '\'' && reply.back() == '\'')))
    reply = trim(reply.substr(1, reply.size() - 2));
  if (reply.empty())
    throw Error(ErrorKind::generation, "refinement produced an empty summary for " + article.id);
  return reply;
}

std::pair<Summary, RefinementTrace> Refiner::refine_loop(const Article& article,
                                                         const Summary& summary, int target,
                                                         int max_iters) {
  if (target < 1 || target > 10)
    throw Error(ErrorKind::precondition, "target must lie in [1, 10]");
  if (max_iters < 1) throw Error(ErrorKind::precondition, "max_iters must be >= 1");

  RefinementTrace trace;
  trace.article_id = summary.article_id;
  trace.method = summary.method;
  loop_reasks_ = 0;

  std::string current = summary.text;
  int best_score = -1;
  std::string best_text = current;

  for (int iter = 0; iter < max_iters; ++iter) {
    IterationRecord record;
    record.input_text = current;
    try {
      record.basic = validate_basic(article, current);
      record.detailed = validate_detailed(article, current);
      bool clamped = false;
      int score = score_hallucination(article, current, &clamped);
      record.score_raw = score;
      record.score_clamped = clamped;

      if (score > best_score) {
        best_score = score;
        best_text = current;
      }

      if (score >= target) {
        record.refined_text = current;
        trace.iterations.push_back(std::move(record));
        trace.terminated_by = Termination::target_reached;
        break;
      }
      if (iter + 1 == max_iters) {
        record.refined_text = best_text;  // hand the best iterate onward
        trace.iterations.push_back(std::move(record));
        trace.terminated_by = Termination::max_iters;
        break;
      }
      record.refined_via_chat = true;  // the call below is journaled even if it
                                       // comes back empty
      current = refine_once(article, current);
      record.refined_text = current;
      trace.iterations.push_back(std::move(record));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::parse && e.kind() != ErrorKind::generation) throw;
      if (e.kind() == ErrorKind::parse) loop_reasks_ += 1;  // base call of the failed step
      trace.iterations.push_back(std::move(record));
      trace.terminated_by = Termination::parse_failure;
      trace.parse_error = e.what();
      break;
    }
  }

  trace.final_text = (trace.terminated_by == Termination::target_reached)
                         ? trace.iterations.back().refined_text
                         : best_text;

  if (trace.terminated_by != Termination::parse_failure) {
    try {
      trace.verification.verdict = validate_basic(article, trace.final_text);
      trace.verification.score = score_hallucination(article, trace.final_text);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::parse) throw;
      loop_reasks_ += 1;  // base call of the failed verification step
      trace.parse_error = e.what();
    }
  }
  trace.extra_calls = loop_reasks_;

  Summary refined;
  refined.article_id = summary.article_id;
  refined.method = summary.method;
  refined.stage = Stage::refined;
  refined.text = trace.final_text;
  return {std::move(refined), std::move(trace)};
}

}  // namespace summafact
