#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "summafact/backend.hpp"
#include "summafact/corpus.hpp"
#include "summafact/summarize.hpp"

namespace summafact {

/// The sentence every evaluation/refinement template must contain.
inline constexpr const char* kHallucinationDefinition =
    "linguistically logical but contains details that are either not mentioned in the "
    "article or are factually inaccurate";

struct PromptCatalog {
  std::string basic_validation;
  std::string detailed_analysis;
  std::string scoring;
  std::string refinement;
  std::string final_verification;

  static PromptCatalog defaults();

  /// Checks every template carries the hallucination definition and the
  /// {article}/{summary} placeholders. Throws configuration error.
  void validate() const;
};

struct Verdict {
  bool hallucinated = false;
  std::optional<std::string> reasoning;  // present for the detailed prompt only
};

struct IterationRecord {
  std::string input_text;
  std::optional<Verdict> basic;
  std::optional<Verdict> detailed;
  std::optional<int> score_raw;  // 1..10 when the scoring step completed
  bool score_clamped = false;
  std::string refined_text;
  bool refined_via_chat = false;  // true when refined_text came from a chat call
};

enum class Termination { target_reached, max_iters, parse_failure };
const char* to_string(Termination t);

struct FinalVerification {
  std::optional<Verdict> verdict;
  std::optional<int> score;
};

struct RefinementTrace {
  std::string article_id;
  Method method = Method::abstractive;
  std::vector<IterationRecord> iterations;
  std::string final_text;
  Termination terminated_by = Termination::target_reached;
  FinalVerification verification;
  std::optional<std::string> parse_error;
  // Chat calls not visible in the records above: re-asks of unparseable
  // replies, plus the base call of a step that never parsed.
  int extra_calls = 0;

  /// Chat calls this trace accounts for (validations, scores, refinements,
  /// final verification, re-asks).
  std::size_t implied_chat_calls() const;
};

/// Prompt-driven evaluation and refinement. One instance per backend; all
/// chat calls go out at temperature 0.
class Refiner {
 public:
  Refiner(Backend& backend, PromptCatalog catalog = PromptCatalog::defaults(),
          int reask_attempts = 1);

  Verdict validate_basic(const Article& article, std::string_view summary_text);
  Verdict validate_detailed(const Article& article, std::string_view summary_text);
  int score_hallucination(const Article& article, std::string_view summary_text,
                          bool* clamped = nullptr);
  std::string refine_once(const Article& article, std::string_view text);

  /// score -> stop at target -> refine -> re-score, at most `max_iters`
  /// rounds; returns the best-scoring iterate. Parse failures end the loop
  /// softly with the best text so far.
  std::pair<Summary, RefinementTrace> refine_loop(const Article& article, const Summary& summary,
                                                  int target = 10, int max_iters = 3);

  const PromptCatalog& catalog() const { return catalog_; }

 private:
  std::string ask(const std::string& prompt);
  std::string ask_reparse(const std::string& prompt,
                          const std::function<bool(const std::string&)>& accept);

  Backend& backend_;
  PromptCatalog catalog_;
  int reask_attempts_;
  int loop_reasks_ = 0;  // collected while a refine_loop is running
};

/// Renders a catalog template: {article} and {summary} substituted.
std::string render_prompt(std::string_view tmpl, std::string_view article_body,
                          std::string_view summary_text);

/// First standalone yes/no token, case-insensitive. nullopt when absent.
std::optional<bool> parse_yes_no_first(std::string_view reply);
/// Last standalone yes/no token; `reasoning_end` receives the offset where
/// the answer token starts.
std::optional<bool> parse_yes_no_last(std::string_view reply, std::size_t* reasoning_end = nullptr);
/// First integer in [1,10]; otherwise the first integer clamped into range
/// with `clamped` set. nullopt when the reply has no integer at all.
std::optional<int> parse_score(std::string_view reply, bool* clamped = nullptr);

}  // namespace summafact
