#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "summafact/errors.hpp"
#include "summafact/pipeline.hpp"

namespace {

struct CliFlags {
  std::string config_path;
  std::string corpus;
  std::optional<std::size_t> limit;
  std::string backend;
  std::string mock_script;
  std::string out_dir;
  std::optional<int> workers;
  bool dump_filter = false;
  std::string rouge_against;
  std::optional<int> k;
  std::optional<double> threshold;
  std::optional<int> target;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> metrics;
};

void add_shared_flags(CLI::App* cmd, CliFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--corpus", flags.corpus, "corpus JSONL path");
  cmd->add_option("--limit", flags.limit, "max articles to load");
  cmd->add_option("--backend", flags.backend, "backend kind: live or mock")
      ->check(CLI::IsMember({"live", "mock"}));
  cmd->add_option("--mock-script", flags.mock_script, "mock backend script (JSON)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--workers", flags.workers, "worker threads");
  cmd->add_flag("--dump-filter", flags.dump_filter, "dump per-summary filter outcomes");
  cmd->add_option("--rouge-against", flags.rouge_against, "ROUGE reference text")
      ->check(CLI::IsMember({"reference", "article"}));
  cmd->add_option("--k", flags.k, "extractive sentence count");
  cmd->add_option("--threshold", flags.threshold, "similarity filter threshold");
  cmd->add_option("--target", flags.target, "refinement score target (1-10)");
  cmd->add_option("--max-iters", flags.max_iters, "refinement iteration cap");
  cmd->add_option("--seed", flags.seed, "seed for mock embeddings");
  cmd->add_option("--metrics", flags.metrics, "enabled metrics")->delimiter(',');
}

// file config first, flags win
summafact::RunConfig build_config(const CliFlags& flags) {
  summafact::RunConfig cfg;
  if (!flags.config_path.empty())
    cfg = summafact::RunConfig::from_file(flags.config_path);

  if (!flags.corpus.empty()) cfg.corpus_path = flags.corpus;
  if (flags.limit) cfg.limit = flags.limit;
  if (!flags.backend.empty()) cfg.backend_kind = flags.backend;
  if (!flags.mock_script.empty()) cfg.mock_script = flags.mock_script;
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.dump_filter) cfg.dump_filter = true;
  if (!flags.rouge_against.empty())
    cfg.rouge_against = summafact::rouge_against_from_string(flags.rouge_against);
  if (flags.k) cfg.k_sentences = *flags.k;
  if (flags.threshold) cfg.filter_threshold = *flags.threshold;
  if (flags.target) cfg.refine_target = *flags.target;
  if (flags.max_iters) cfg.refine_max_iters = *flags.max_iters;
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.metrics.empty())
    cfg.enabled_metrics = std::set<std::string>(flags.metrics.begin(), flags.metrics.end());
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"summafact: summarize, filter, refine and score news articles"};
  app.require_subcommand(1);

  CliFlags flags;
  auto* run = app.add_subcommand("run", "full pipeline: summarize, refine, evaluate, report");
  auto* summarize = app.add_subcommand("summarize", "generate unrefined summaries");
  auto* refine = app.add_subcommand("refine", "refine saved summaries");
  auto* evaluate = app.add_subcommand("evaluate", "score saved summaries");
  auto* stats = app.add_subcommand("stats", "paired tests over saved scorecards");
  auto* report = app.add_subcommand("report", "emit report artifacts from saved scorecards");
  for (auto* cmd : {run, summarize, refine, evaluate, stats, report})
    add_shared_flags(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : summafact::exit_code::config;
  }

  try {
    summafact::RunConfig cfg = build_config(flags);
    if (run->parsed()) return summafact::cmd_run(cfg);
    if (summarize->parsed()) return summafact::cmd_summarize(cfg);
    if (refine->parsed()) return summafact::cmd_refine(cfg);
    if (evaluate->parsed()) return summafact::cmd_evaluate(cfg);
    if (stats->parsed()) return summafact::cmd_stats(cfg);
    if (report->parsed()) return summafact::cmd_report(cfg);
  } catch (const summafact::Error& e) {
    std::cerr << e.what() << "\n";
    return summafact::exit_code::config;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return summafact::exit_code::fatal;
  }
  return summafact::exit_code::config;
}
