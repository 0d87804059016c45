#include <doctest.h>

#include "summafact/errors.hpp"
#include "summafact/refine.hpp"
#include "test_support.hpp"

using namespace summafact;
using summafact::testing::TempDir;
using summafact::testing::write_file;

namespace {

const Article kArticle{"a1", "The mayor opened a bridge on Monday.", ""};

Summary make_summary(const std::string& text) {
  Summary s;
  s.article_id = "a1";
  s.method = Method::abstractive;
  s.stage = Stage::unrefined;
  s.text = text;
  return s;
}

std::shared_ptr<MockBackend> scripted(const nlohmann::json& rules) {
  TempDir dir;
  write_file(dir.file("s.json"),
             nlohmann::json{{"embedding_dim", 4}, {"seed", 1}, {"rules", rules}}.dump());
  return MockBackend::from_script(dir.file("s.json"));
}

nlohmann::json rule(const std::string& match, std::vector<std::string> replies) {
  return {{"match", match}, {"replies", replies}};
}

}  // namespace

TEST_CASE("prompt templates carry the definition, placeholders and answer forms") {
  PromptCatalog catalog = PromptCatalog::defaults();
  catalog.validate();

  for (const std::string* tmpl :
       {&catalog.basic_validation, &catalog.detailed_analysis, &catalog.scoring,
        &catalog.refinement, &catalog.final_verification}) {
    CHECK(tmpl->find(kHallucinationDefinition) != std::string::npos);
    CHECK(tmpl->find("{article}") != std::string::npos);
    CHECK(tmpl->find("{summary}") != std::string::npos);
  }
  CHECK(catalog.basic_validation.find("Answer (yes or no)") != std::string::npos);
  CHECK(catalog.detailed_analysis.find(
            "Explain your reasoning step by step then answer the question (yes or no)") !=
        std::string::npos);
  CHECK(catalog.scoring.find("Score the following summary by the given corresponding article") !=
        std::string::npos);
  CHECK(catalog.refinement.find("achieve the score of 10 out of 10") != std::string::npos);
  CHECK(catalog.final_verification.find("Final Verification: Re-evaluate the refined summaries") !=
        std::string::npos);

  PromptCatalog broken = catalog;
  broken.scoring = "Score {article} {summary}";  // definition sentence missing
  CHECK_THROWS_AS(broken.validate(), Error);
}

TEST_CASE("rendered prompts embed article and summary verbatim") {
  std::string prompt =
      render_prompt(PromptCatalog::defaults().basic_validation, kArticle.body, "Some summary.");
  CHECK(prompt.find(kArticle.body) != std::string::npos);
  CHECK(prompt.find("Some summary.") != std::string::npos);
  CHECK(prompt.find("{article}") == std::string::npos);
  CHECK(prompt.find("{summary}") == std::string::npos);
}

TEST_CASE("yes/no parsing") {
  CHECK(parse_yes_no_first("No.") == false);
  CHECK(parse_yes_no_first("Yes, because dates differ.") == true);
  CHECK(parse_yes_no_first("maybe") == std::nullopt);
  CHECK(parse_yes_no_first("noise yesterday") == std::nullopt);  // embedded words do not count

  std::size_t end = 0;
  CHECK(parse_yes_no_last("Yes at first glance. Step 2 says otherwise. Final answer: no",
                          &end) == false);
  CHECK(end > 0);
}

TEST_CASE("score parsing") {
  CHECK(parse_score("8") == 8);
  CHECK(parse_score("I give it 10/10") == 10);
  CHECK(parse_score("zero") == std::nullopt);
  // a later in-range integer beats an earlier out-of-range one
  bool clamped = true;
  CHECK(parse_score("15 out of 10", &clamped) == 10);
  CHECK_FALSE(clamped);
  // with no in-range integer anywhere, the first one is clamped and flagged
  CHECK(parse_score("15", &clamped) == 10);
  CHECK(clamped);
  clamped = false;
  CHECK(parse_score("0", &clamped) == 1);
  CHECK(clamped);
}

TEST_CASE("validate_basic parses the first standalone answer") {
  auto backend = scripted(nlohmann::json::array({rule("Answer (yes or no)", {"No."})}));
  Refiner refiner(*backend);
  Verdict v = refiner.validate_basic(kArticle, "summary text");
  CHECK_FALSE(v.hallucinated);
  CHECK_FALSE(v.reasoning.has_value());
}

TEST_CASE("validate_basic re-asks once then fails") {
  auto backend =
      scripted(nlohmann::json::array({rule("Answer (yes or no)", {"maybe", "perhaps"})}));
  Refiner refiner(*backend);
  try {
    refiner.validate_basic(kArticle, "summary text");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
  }
  CHECK(backend->audit_log()->count("chat") == 2);  // one ask + one re-ask
}

TEST_CASE("validate_detailed keeps reasoning and takes the last answer") {
  auto backend = scripted(nlohmann::json::array(
      {rule("Explain your reasoning", {"Step 1: dates match. Step 2: no invented facts. no"})}));
  Refiner refiner(*backend);
  Verdict v = refiner.validate_detailed(kArticle, "summary text");
  CHECK_FALSE(v.hallucinated);
  REQUIRE(v.reasoning.has_value());
  CHECK(v.reasoning->find("Step 1: dates match") != std::string::npos);

  // a yes early in the reasoning does not override the final answer
  auto tricky = scripted(nlohmann::json::array(
      {rule("Explain your reasoning", {"Yes it looks odd at first, but checking closely: no"})}));
  Refiner tricky_refiner(*tricky);
  CHECK_FALSE(tricky_refiner.validate_detailed(kArticle, "text").hallucinated);
}

TEST_CASE("empty detailed reply is a parse error") {
  auto backend = scripted(nlohmann::json::array({rule("Explain your reasoning", {""})}));
  Refiner refiner(*backend);
  CHECK_THROWS_AS(refiner.validate_detailed(kArticle, "text"), Error);
}

TEST_CASE("score_hallucination parses scripted scores") {
  auto backend = scripted(nlohmann::json::array({rule("Score the following", {"8"})}));
  Refiner refiner(*backend);
  CHECK(refiner.score_hallucination(kArticle, "text") == 8);
}

TEST_CASE("refine_once trims and strips surrounding quotes") {
  auto backend =
      scripted(nlohmann::json::array({rule("Refine the summary", {"\"Refined text.\""})}));
  Refiner refiner(*backend);
  CHECK(refiner.refine_once(kArticle, "old text") == "Refined text.");

  auto empty = scripted(nlohmann::json::array({rule("Refine the summary", {"  "})}));
  Refiner empty_refiner(*empty);
  CHECK_THROWS_AS(empty_refiner.refine_once(kArticle, "old text"), Error);
}

namespace {

std::shared_ptr<MockBackend> loop_backend(std::vector<std::string> scores,
                                          std::vector<std::string> refinements) {
  nlohmann::json rules = nlohmann::json::array();
  rules.push_back(rule("Explain your reasoning", {"Reads fine overall. no"}));
  rules.push_back(rule("Answer (yes or no)", {"no"}));
  rules.push_back(rule("Score the following", scores));
  if (!refinements.empty()) rules.push_back(rule("Refine the summary", refinements));
  return scripted(rules);
}

}  // namespace

TEST_CASE("loop stops immediately when the target is already met") {
  auto backend = loop_backend({"10"}, {});
  Refiner refiner(*backend);
  auto [refined, trace] = refiner.refine_loop(kArticle, make_summary("Original."), 10, 3);

  REQUIRE(trace.iterations.size() == 1);
  CHECK(trace.terminated_by == Termination::target_reached);
  CHECK(trace.iterations[0].score_raw == 10);
  CHECK_FALSE(trace.iterations[0].refined_via_chat);  // no refinement call
  CHECK(refined.text == "Original.");
  CHECK(refined.stage == Stage::refined);

  // final verification ran basic validation + scoring on the final text
  REQUIRE(trace.verification.verdict.has_value());
  REQUIRE(trace.verification.score.has_value());
  CHECK(*trace.verification.score == 10);

  CHECK(backend->audit_log()->count("chat") == trace.implied_chat_calls());
}

TEST_CASE("loop iterates to the target across three scores") {
  auto backend = loop_backend({"6", "9", "10"}, {"Better text.", "Best text."});
  Refiner refiner(*backend);
  auto [refined, trace] = refiner.refine_loop(kArticle, make_summary("Original."), 10, 3);

  REQUIRE(trace.iterations.size() == 3);
  CHECK(trace.terminated_by == Termination::target_reached);
  CHECK(trace.iterations[0].input_text == "Original.");
  CHECK(trace.iterations[0].score_raw == 6);
  CHECK(trace.iterations[0].refined_text == "Better text.");
  CHECK(trace.iterations[1].input_text == "Better text.");
  CHECK(trace.iterations[1].score_raw == 9);
  CHECK(trace.iterations[2].input_text == "Best text.");
  CHECK(trace.iterations[2].score_raw == 10);
  CHECK(refined.text == "Best text.");
  CHECK(trace.final_text == trace.iterations.back().refined_text);

  CHECK(backend->audit_log()->count("chat") == trace.implied_chat_calls());
}

TEST_CASE("loop returns the best-scoring iterate when scores decline") {
  auto backend = loop_backend({"6", "5"}, {"Worse text."});
  Refiner refiner(*backend);
  auto [refined, trace] = refiner.refine_loop(kArticle, make_summary("Original."), 10, 2);

  REQUIRE(trace.iterations.size() == 2);
  CHECK(trace.terminated_by == Termination::max_iters);
  CHECK(trace.iterations[0].score_raw == 6);
  CHECK(trace.iterations[1].score_raw == 5);
  CHECK(refined.text == "Original.");  // score 6 beats score 5
  CHECK(trace.final_text == trace.iterations.back().refined_text);

  int best = -1;
  for (const auto& it : trace.iterations)
    if (it.score_raw) best = std::max(best, *it.score_raw);
  CHECK(best == 6);

  CHECK(backend->audit_log()->count("chat") == trace.implied_chat_calls());
}

TEST_CASE("parse failures terminate the loop softly with the best text so far") {
  nlohmann::json rules = nlohmann::json::array();
  rules.push_back(rule("Explain your reasoning", {"Looks fine. no"}));
  rules.push_back(rule("Answer (yes or no)", {"no"}));
  rules.push_back(rule("Score the following", {"6", "gibberish", "gibberish"}));
  rules.push_back(rule("Refine the summary", {"Second text."}));
  auto backend = scripted(rules);
  Refiner refiner(*backend);
  auto [refined, trace] = refiner.refine_loop(kArticle, make_summary("Original."), 10, 3);

  CHECK(trace.terminated_by == Termination::parse_failure);
  CHECK(trace.parse_error.has_value());
  CHECK(refined.text == "Original.");  // only scored iterate
  CHECK(trace.iterations.size() == 2);
  CHECK_FALSE(trace.verification.score.has_value());  // no verification after failure

  CHECK(backend->audit_log()->count("chat") == trace.implied_chat_calls());
}

TEST_CASE("loop validates its arguments") {
  auto backend = loop_backend({"10"}, {});
  Refiner refiner(*backend);
  CHECK_THROWS_AS(refiner.refine_loop(kArticle, make_summary("x"), 11, 3), Error);
  CHECK_THROWS_AS(refiner.refine_loop(kArticle, make_summary("x"), 10, 0), Error);
}

TEST_CASE("iteration count never exceeds max_iters") {
  auto backend = loop_backend({"2"}, {"Still bad."});
  Refiner refiner(*backend);
  auto [refined, trace] = refiner.refine_loop(kArticle, make_summary("Original."), 10, 3);
  CHECK(trace.iterations.size() == 3);
  CHECK(trace.terminated_by == Termination::max_iters);
}
