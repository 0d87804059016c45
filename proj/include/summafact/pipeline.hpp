#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "summafact/backend.hpp"
#include "summafact/metrics.hpp"
#include "summafact/refine.hpp"
#include "summafact/report.hpp"

namespace summafact {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int fatal = 1;
inline constexpr int config = 2;
inline constexpr int backend_unreachable = 3;
}  // namespace exit_code

struct RunConfig {
  std::filesystem::path corpus_path;
  std::optional<std::size_t> limit;

  std::string backend_kind = "mock";  // "mock" | "live"
  std::filesystem::path mock_script;
  LiveConfig live;
  int max_inflight = 4;

  int k_sentences = 3;
  int abstractive_max_sentences = 3;
  double filter_threshold = 0.5;
  int refine_target = 10;
  int refine_max_iters = 3;
  std::set<std::string> enabled_metrics{metric_names().begin(), metric_names().end()};
  int num_questions = 5;
  RougeAgainst rouge_against = RougeAgainst::reference;
  double alpha = 0.05;

  std::filesystem::path output_dir = "out";
  int workers = 1;
  std::uint64_t seed = 0;
  bool dump_filter = false;

  std::string generation_prompt = kDefaultGenerationPrompt;
  PromptCatalog prompts = PromptCatalog::defaults();
  MetricPrompts metric_prompts = MetricPrompts::defaults();

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);

  /// Throws configuration error on invalid values.
  void validate() const;

  /// Digest over the semantic settings only; execution knobs (output dir,
  /// worker count) do not change the hash, and the mock script enters by
  /// content.
  std::string config_hash() const;
};

/// Full pipeline: summarize -> evaluate -> refine -> re-evaluate -> stats ->
/// report. Per-article failures are logged and skipped; returns a process
/// exit code.
int cmd_run(const RunConfig& config);

/// Stage commands; each reads the previous stage's JSONL artifacts from the
/// output dir and writes its own, so `run` decomposes into
/// summarize -> refine -> evaluate -> stats/report.
int cmd_summarize(const RunConfig& config);
int cmd_refine(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_stats(const RunConfig& config);
int cmd_report(const RunConfig& config);

// JSONL (de)serialization for the stage artifacts.
nlohmann::json summary_to_json(const Summary& s);
Summary summary_from_json(const nlohmann::json& j);
nlohmann::json scorecard_to_json(const ScoreCard& c);
ScoreCard scorecard_from_json(const nlohmann::json& j);
nlohmann::json trace_to_json(const RefinementTrace& t);
nlohmann::json test_result_to_json(const TestResult& r);

}  // namespace summafact
