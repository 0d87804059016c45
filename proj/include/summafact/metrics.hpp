#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "summafact/backend.hpp"
#include "summafact/corpus.hpp"
#include "summafact/refine.hpp"
#include "summafact/summarize.hpp"

namespace summafact {

/// Metric names in Table-layout order.
const std::vector<std::string>& metric_names();
bool is_metric_name(std::string_view name);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Clipped n-gram overlap (n in {1,2}) over lowercase punctuation-stripped
/// tokens. Empty gram sets on either side score zero.
RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n);

/// Token-level longest common subsequence.
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

/// Unigram F1 between two answer strings (QAGS answer comparison).
double token_f1(std::string_view a, std::string_view b);

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  auto operator<=>(const Triple&) const = default;
};

struct ScoreCard {
  std::string article_id;
  Method method = Method::extractive;
  Stage stage = Stage::unrefined;
  std::map<std::string, double> scores;          // metric name -> value in [0,1]
  std::map<std::string, nlohmann::json> details;  // metric name -> diagnostics
};

struct MetricPrompts {
  std::string qags_generate;
  std::string qags_answer;
  std::string factsumm_extract;
  std::string summac_entail;

  static MetricPrompts defaults();
};

enum class RougeAgainst { reference, article };
RougeAgainst rouge_against_from_string(std::string_view s);

/// Backend-mediated metric suite. The three model-based metrics (FactSumm,
/// QAGS, SummaC) are prompt approximations routed through the gateway; a
/// metric that cannot produce a value throws metric_unavailable.
class MetricSuite {
 public:
  MetricSuite(Backend& backend, Refiner& refiner, MetricPrompts prompts = MetricPrompts::defaults(),
              int num_questions = 5);

  double gpt_metric(const Article& article, std::string_view summary_text,
                    nlohmann::json* details = nullptr);
  double qags_metric(const Article& article, std::string_view summary_text,
                     nlohmann::json* details = nullptr);
  double factsumm_metric(const Article& article, std::string_view summary_text,
                         nlohmann::json* details = nullptr);
  double summac_metric(const Article& article, std::string_view summary_text,
                       nlohmann::json* details = nullptr);

  ScoreCard evaluate_all(const Article& article, const Summary& summary,
                         const std::set<std::string>& enabled,
                         RougeAgainst against = RougeAgainst::reference);

 private:
  std::vector<Triple> extract_triples(std::string_view text);
  std::vector<std::string> generate_questions(std::string_view summary_text);
  std::string answer(std::string_view context, std::string_view question);

  Backend& backend_;
  Refiner& refiner_;
  MetricPrompts prompts_;
  int num_questions_;
};

}  // namespace summafact
