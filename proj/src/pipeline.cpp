#include "summafact/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "summafact/errors.hpp"
#include "summafact/util.hpp"

namespace summafact {

namespace {

constexpr const char* kSummariesFile = "summaries.jsonl";
constexpr const char* kRefinedFile = "refined_summaries.jsonl";
constexpr const char* kTracesFile = "traces.jsonl";
constexpr const char* kScorecardsFile = "scorecards.jsonl";
constexpr const char* kFilterFile = "filter.jsonl";
constexpr const char* kAuditFile = "audit.jsonl";
constexpr const char* kManifestFile = "manifest.json";

void append_jsonl(std::ofstream& out, const nlohmann::json& j) { out << j.dump() << '\n'; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  return out;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "expected artifact not found: " + path.string());
  std::vector<nlohmann::json> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(stripped, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorKind::validation,
                  path.string() + " line " + std::to_string(line_no) + ": malformed JSON");
    records.push_back(std::move(j));
  }
  return records;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::string raw;
  try {
    raw = read_file(path.string());
  } catch (const Error& e) {
    throw Error(ErrorKind::configuration, e.what());
  }
  nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorKind::configuration, "config file is not a JSON object: " + path.string());
  return from_json(j);
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  if (j.contains("corpus")) cfg.corpus_path = j["corpus"].get<std::string>();
  if (j.contains("limit") && !j["limit"].is_null())
    cfg.limit = j["limit"].get<std::size_t>();

  if (j.contains("backend")) {
    const auto& b = j["backend"];
    cfg.backend_kind = b.value("kind", cfg.backend_kind);
    if (b.contains("script")) cfg.mock_script = b["script"].get<std::string>();
    cfg.live.base_url = b.value("base_url", cfg.live.base_url);
    cfg.live.chat_model = b.value("chat_model", cfg.live.chat_model);
    cfg.live.embed_model = b.value("embed_model", cfg.live.embed_model);
    cfg.live.api_key_env = b.value("api_key_env", cfg.live.api_key_env);
    cfg.max_inflight = b.value("max_inflight", cfg.max_inflight);
    if (b.contains("retry")) {
      const auto& r = b["retry"];
      cfg.live.retry.retries = r.value("retries", cfg.live.retry.retries);
      cfg.live.retry.initial_delay_ms = r.value("initial_delay_ms", cfg.live.retry.initial_delay_ms);
      cfg.live.retry.backoff_factor = r.value("backoff_factor", cfg.live.retry.backoff_factor);
      cfg.live.retry.jitter = r.value("jitter", cfg.live.retry.jitter);
    }
  }
  if (j.contains("summarize")) {
    cfg.k_sentences = j["summarize"].value("k_sentences", cfg.k_sentences);
    cfg.abstractive_max_sentences =
        j["summarize"].value("max_sentences", cfg.abstractive_max_sentences);
  }
  if (j.contains("filter")) cfg.filter_threshold = j["filter"].value("threshold", 0.5);
  if (j.contains("refine")) {
    cfg.refine_target = j["refine"].value("target", cfg.refine_target);
    cfg.refine_max_iters = j["refine"].value("max_iters", cfg.refine_max_iters);
  }
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    if (m.contains("enabled")) {
      cfg.enabled_metrics.clear();
      for (const auto& name : m["enabled"]) cfg.enabled_metrics.insert(name.get<std::string>());
    }
    cfg.num_questions = m.value("num_questions", cfg.num_questions);
    if (m.contains("rouge_against"))
      cfg.rouge_against = rouge_against_from_string(m["rouge_against"].get<std::string>());
  }
  if (j.contains("stats")) cfg.alpha = j["stats"].value("alpha", cfg.alpha);
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  cfg.workers = j.value("workers", cfg.workers);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.dump_filter = j.value("dump_filter", cfg.dump_filter);

  if (j.contains("prompts")) {
    const auto& p = j["prompts"];
    cfg.generation_prompt = p.value("generation", cfg.generation_prompt);
    if (p.contains("refinement")) {
      const auto& r = p["refinement"];
      cfg.prompts.basic_validation = r.value("basic_validation", cfg.prompts.basic_validation);
      cfg.prompts.detailed_analysis = r.value("detailed_analysis", cfg.prompts.detailed_analysis);
      cfg.prompts.scoring = r.value("scoring", cfg.prompts.scoring);
      cfg.prompts.refinement = r.value("refinement", cfg.prompts.refinement);
      cfg.prompts.final_verification =
          r.value("final_verification", cfg.prompts.final_verification);
    }
    if (p.contains("metrics")) {
      const auto& m = p["metrics"];
      cfg.metric_prompts.qags_generate = m.value("qags_generate", cfg.metric_prompts.qags_generate);
      cfg.metric_prompts.qags_answer = m.value("qags_answer", cfg.metric_prompts.qags_answer);
      cfg.metric_prompts.factsumm_extract =
          m.value("factsumm_extract", cfg.metric_prompts.factsumm_extract);
      cfg.metric_prompts.summac_entail =
          m.value("summac_entail", cfg.metric_prompts.summac_entail);
    }
  }
  return cfg;
}

void RunConfig::validate() const {
  if (backend_kind != "mock" && backend_kind != "live")
    throw Error(ErrorKind::configuration, "backend kind must be \"mock\" or \"live\"");
  if (backend_kind == "mock" && mock_script.empty())
    throw Error(ErrorKind::configuration, "mock backend requires a script path");
  if (backend_kind == "live" && live.base_url.empty())
    throw Error(ErrorKind::configuration, "live backend requires a base_url");
  if (k_sentences < 1) throw Error(ErrorKind::configuration, "k_sentences must be >= 1");
  if (abstractive_max_sentences < 1)
    throw Error(ErrorKind::configuration, "max_sentences must be >= 1");
  if (filter_threshold <= 0.0 || filter_threshold >= 1.0)
    throw Error(ErrorKind::configuration, "filter threshold must lie in (0, 1)");
  if (refine_target < 1 || refine_target > 10)
    throw Error(ErrorKind::configuration, "refine target must lie in [1, 10]");
  if (refine_max_iters < 1) throw Error(ErrorKind::configuration, "refine max_iters must be >= 1");
  if (enabled_metrics.empty())
    throw Error(ErrorKind::configuration, "at least one metric must be enabled");
  for (const auto& name : enabled_metrics)
    if (!is_metric_name(name)) throw Error(ErrorKind::configuration, "unknown metric: " + name);
  if (num_questions < 1) throw Error(ErrorKind::configuration, "num_questions must be >= 1");
  if (alpha <= 0.0 || alpha >= 1.0)
    throw Error(ErrorKind::configuration, "alpha must lie in (0, 1)");
  if (workers < 1) throw Error(ErrorKind::configuration, "workers must be >= 1");
  if (max_inflight < 1) throw Error(ErrorKind::configuration, "max_inflight must be >= 1");
  prompts.validate();
}

std::string RunConfig::config_hash() const {
  nlohmann::json canonical;
  canonical["backend"] = {{"kind", backend_kind},
                          {"base_url", live.base_url},
                          {"chat_model", live.chat_model},
                          {"embed_model", live.embed_model}};
  if (backend_kind == "mock" && !mock_script.empty()) {
    std::string script;
    try {
      script = read_file(mock_script.string());
    } catch (const Error&) {
      script = "";  // absence surfaces later as a configuration error
    }
    canonical["backend"]["script_sha256"] = sha256_hex(script);
  }
  canonical["k_sentences"] = k_sentences;
  canonical["max_sentences"] = abstractive_max_sentences;
  canonical["filter_threshold"] = filter_threshold;
  canonical["refine_target"] = refine_target;
  canonical["refine_max_iters"] = refine_max_iters;
  canonical["metrics"] = std::vector<std::string>(enabled_metrics.begin(), enabled_metrics.end());
  canonical["num_questions"] = num_questions;
  canonical["rouge_against"] = (rouge_against == RougeAgainst::reference) ? "reference" : "article";
  canonical["alpha"] = alpha;
  canonical["seed"] = seed;
  if (limit) canonical["limit"] = *limit;
  canonical["generation_prompt"] = generation_prompt;
  canonical["prompts"] = {{"basic_validation", prompts.basic_validation},
                          {"detailed_analysis", prompts.detailed_analysis},
                          {"scoring", prompts.scoring},
                          {"refinement", prompts.refinement},
                          {"final_verification", prompts.final_verification}};
  canonical["metric_prompts"] = {{"qags_generate", metric_prompts.qags_generate},
                                 {"qags_answer", metric_prompts.qags_answer},
                                 {"factsumm_extract", metric_prompts.factsumm_extract},
                                 {"summac_entail", metric_prompts.summac_entail}};
  return sha256_hex(canonical.dump());
}

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

nlohmann::json summary_to_json(const Summary& s) {
  return {{"article_id", s.article_id},
          {"method", to_string(s.method)},
          {"stage", to_string(s.stage)},
          {"text", s.text},
          {"provenance", s.provenance},
          {"emptied_by_filter", s.emptied_by_filter}};
}

Summary summary_from_json(const nlohmann::json& j) {
  Summary s;
  s.article_id = j.at("article_id").get<std::string>();
  s.method = method_from_string(j.at("method").get<std::string>());
  s.stage = stage_from_string(j.at("stage").get<std::string>());
  s.text = j.at("text").get<std::string>();
  if (j.contains("provenance")) s.provenance = j["provenance"].get<std::vector<std::size_t>>();
  s.emptied_by_filter = j.value("emptied_by_filter", false);
  return s;
}

nlohmann::json scorecard_to_json(const ScoreCard& c) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [name, value] : c.scores) scores[name] = value;
  nlohmann::json details = nlohmann::json::object();
  for (const auto& [name, value] : c.details) details[name] = value;
  return {{"article_id", c.article_id},
          {"method", to_string(c.method)},
          {"stage", to_string(c.stage)},
          {"scores", scores},
          {"details", details}};
}

ScoreCard scorecard_from_json(const nlohmann::json& j) {
  ScoreCard c;
  c.article_id = j.at("article_id").get<std::string>();
  c.method = method_from_string(j.at("method").get<std::string>());
  c.stage = stage_from_string(j.at("stage").get<std::string>());
  for (const auto& [name, value] : j.at("scores").items()) c.scores[name] = value.get<double>();
  if (j.contains("details"))
    for (const auto& [name, value] : j["details"].items()) c.details[name] = value;
  return c;
}

namespace {

nlohmann::json verdict_to_json(const Verdict& v) {
  nlohmann::json j = {{"hallucinated", v.hallucinated}};
  if (v.reasoning) j["reasoning"] = *v.reasoning;
  return j;
}

}  // namespace

nlohmann::json trace_to_json(const RefinementTrace& t) {
  nlohmann::json iterations = nlohmann::json::array();
  for (const auto& it : t.iterations) {
    nlohmann::json rec;
    rec["input_text"] = it.input_text;
    rec["basic"] = it.basic ? verdict_to_json(*it.basic) : nlohmann::json(nullptr);
    rec["detailed"] = it.detailed ? verdict_to_json(*it.detailed) : nlohmann::json(nullptr);
    rec["score_raw"] = it.score_raw ? nlohmann::json(*it.score_raw) : nlohmann::json(nullptr);
    rec["score_clamped"] = it.score_clamped;
    rec["refined_text"] = it.refined_text;
    rec["refined_via_chat"] = it.refined_via_chat;
    iterations.push_back(std::move(rec));
  }
  nlohmann::json verification;
  verification["verdict"] = t.verification.verdict ? verdict_to_json(*t.verification.verdict)
                                                   : nlohmann::json(nullptr);
  verification["score"] =
      t.verification.score ? nlohmann::json(*t.verification.score) : nlohmann::json(nullptr);
  return {{"article_id", t.article_id},
          {"method", to_string(t.method)},
          {"iterations", iterations},
          {"final_text", t.final_text},
          {"terminated_by", to_string(t.terminated_by)},
          {"verification", verification},
          {"parse_error", t.parse_error ? nlohmann::json(*t.parse_error) : nlohmann::json(nullptr)},
          {"extra_calls", t.extra_calls}};
}

nlohmann::json test_result_to_json(const TestResult& r) {
  return {{"metric", r.metric},
          {"mean_before", round_to(r.mean_before)},
          {"mean_after", round_to(r.mean_after)},
          {"t_stat", std::isfinite(r.t_stat) ? nlohmann::json(round_to(r.t_stat))
                                             : nlohmann::json(nullptr)},
          {"df", r.df},
          {"p_value", round_to(r.p_value)},
          {"p_other_side", round_to(r.p_other_side)},
          {"ci_low", round_to(r.ci95.first)},
          {"ci_high", round_to(r.ci95.second)},
          {"reject_null", r.reject_null},
          {"degenerate", r.degenerate},
          {"n", r.n}};
}

// ---------------------------------------------------------------------------
// shared pipeline machinery
// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<Backend> make_backend(const RunConfig& cfg, bool probe_live) {
  std::shared_ptr<Backend> backend;
  if (cfg.backend_kind == "mock") {
    backend = MockBackend::from_script(cfg.mock_script, cfg.seed);
  } else {
    auto live = std::make_shared<LiveBackend>(cfg.live);
    if (probe_live) live->probe();
    backend = live;
  }
  backend->set_max_inflight(cfg.max_inflight);
  return backend;
}

std::string corpus_digest(const RunConfig& cfg) {
  return sha256_hex(read_file(cfg.corpus_path.string()));
}

std::string run_id_for(const std::string& config_hash, const std::string& digest) {
  return sha256_hex(config_hash + ":" + digest).substr(0, 12);
}

void write_manifest(const RunConfig& cfg, const std::string& digest,
                    const std::string& backend_id, std::size_t article_count,
                    const std::vector<std::string>& skipped) {
  std::string hash = cfg.config_hash();
  nlohmann::json manifest = {{"config_hash", hash},
                             {"corpus_digest", digest},
                             {"backend_id", backend_id},
                             {"run_id", run_id_for(hash, digest)},
                             {"article_count", article_count},
                             {"skipped", skipped}};
  auto out = open_out(cfg.output_dir / kManifestFile);
  out << manifest.dump(2) << '\n';
}

/// Runs fn(i) for i in [0, count) across the configured worker threads.
void parallel_for(int workers, std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      fn(i);
    }
  };
  std::vector<std::thread> threads;
  int spawn = std::min<int>(workers - 1, static_cast<int>(count));
  threads.reserve(spawn);
  for (int t = 0; t < spawn; ++t) threads.emplace_back(drain);
  drain();
  for (auto& t : threads) t.join();
}

struct ArticleBundle {
  std::vector<Summary> unrefined;
  std::vector<Summary> refined;
  std::vector<ScoreCard> unrefined_cards;
  std::vector<ScoreCard> refined_cards;
  std::vector<RefinementTrace> traces;
  std::vector<nlohmann::json> filter_dumps;
  bool failed = false;
  std::string error;
};

std::vector<Summary> make_unrefined(Backend& backend, const Article& article,
                                    const RunConfig& cfg, nlohmann::json* filter_dump) {
  std::vector<Summary> out;
  out.push_back(extractive_summarize(backend, article, cfg.k_sentences));
  out.push_back(abstractive_summarize(backend, article, cfg.generation_prompt,
                                      cfg.abstractive_max_sentences));
  FilterOutcome outcome;
  out.push_back(hybrid_summarize(backend, article, cfg.k_sentences, cfg.filter_threshold,
                                 cfg.generation_prompt, cfg.abstractive_max_sentences, &outcome));
  if (filter_dump) {
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& [token, sim] : outcome.dropped)
      dropped.push_back({{"token", token}, {"max_similarity", round_to(sim)}});
    *filter_dump = {{"article_id", article.id},
                    {"threshold", outcome.threshold},
                    {"kept", outcome.kept},
                    {"dropped", dropped}};
  }
  return out;
}

ArticleBundle process_article(Backend& backend, const Article& article, const RunConfig& cfg) {
  ArticleBundle bundle;
  try {
    Refiner refiner(backend, cfg.prompts);
    MetricSuite suite(backend, refiner, cfg.metric_prompts, cfg.num_questions);

    nlohmann::json filter_dump;
    bundle.unrefined =
        make_unrefined(backend, article, cfg, cfg.dump_filter ? &filter_dump : nullptr);
    if (cfg.dump_filter) bundle.filter_dumps.push_back(std::move(filter_dump));

    for (const auto& summary : bundle.unrefined)
      bundle.unrefined_cards.push_back(
          suite.evaluate_all(article, summary, cfg.enabled_metrics, cfg.rouge_against));

    for (const auto& summary : bundle.unrefined) {
      auto [refined, trace] =
          refiner.refine_loop(article, summary, cfg.refine_target, cfg.refine_max_iters);
      bundle.refined.push_back(refined);
      bundle.traces.push_back(std::move(trace));
      bundle.refined_cards.push_back(
          suite.evaluate_all(article, refined, cfg.enabled_metrics, cfg.rouge_against));
    }
  } catch (const std::exception& e) {
    bundle.failed = true;
    bundle.error = e.what();
  }
  return bundle;
}

RunReport assemble_report(const std::vector<ScoreCard>& scorecards, const std::string& config_hash,
                          const std::string& digest, double alpha) {
  RunReport report;
  report.config_hash = config_hash;
  report.run_id = run_id_for(config_hash, digest);
  report.traces_path = kTracesFile;

  if (scorecards.empty()) {
    report.notes.push_back("no scorecards available");
    return report;
  }
  report.per_metric_means = aggregate(scorecards);
  report.test_table = build_table(scorecards, &report.diagnostics, alpha);
  if (report.test_table.empty()) report.notes.push_back("no matched before/after pairs");

  report.correlation_points = mean_pairs(report.per_metric_means);
  if (report.correlation_points.size() >= 2) {
    std::vector<double> pre;
    std::vector<double> post;
    for (const auto& [a, b] : report.correlation_points) {
      pre.push_back(a);
      post.push_back(b);
    }
    try {
      report.correlation = linear_fit(pre, post);
    } catch (const Error& e) {
      report.notes.push_back(std::string("correlation not computed: ") + e.what());
    }
  } else {
    report.notes.push_back("too few mean pairs for correlation");
  }
  return report;
}

int classify_exit(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::configuration:
    case ErrorKind::validation:
    case ErrorKind::precondition:
    case ErrorKind::io:
      return exit_code::config;
    case ErrorKind::transport:
    case ErrorKind::backend:
      return exit_code::backend_unreachable;
    default:
      return exit_code::fatal;
  }
}

void sort_by_id(std::vector<Article>& articles) {
  std::stable_sort(articles.begin(), articles.end(),
                   [](const Article& a, const Article& b) { return a.id < b.id; });
}

}  // namespace

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_run(const RunConfig& cfg) {
  try {
    cfg.validate();
    std::vector<Article> articles = load_corpus(cfg.corpus_path, cfg.limit);
    sort_by_id(articles);
    std::string digest = corpus_digest(cfg);

    std::filesystem::create_directories(cfg.output_dir);
    std::filesystem::remove(cfg.output_dir / kAuditFile);
    auto backend = make_backend(cfg, /*probe_live=*/true);
    backend->set_audit_log(std::make_shared<AuditLog>(cfg.output_dir / kAuditFile));

    std::vector<ArticleBundle> bundles(articles.size());
    parallel_for(cfg.workers, articles.size(),
                 [&](std::size_t i) { bundles[i] = process_article(*backend, articles[i], cfg); });

    std::vector<std::string> skipped;
    std::vector<ScoreCard> all_cards;
    {
      auto summaries_out = open_out(cfg.output_dir / kSummariesFile);
      auto refined_out = open_out(cfg.output_dir / kRefinedFile);
      auto traces_out = open_out(cfg.output_dir / kTracesFile);
      std::ofstream filter_out;
      if (cfg.dump_filter) filter_out = open_out(cfg.output_dir / kFilterFile);

      for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto& bundle = bundles[i];
        if (bundle.failed) {
          skipped.push_back(articles[i].id);
          std::cerr << "skipping article " << articles[i].id << ": " << bundle.error << "\n";
          continue;
        }
        for (const auto& s : bundle.unrefined) append_jsonl(summaries_out, summary_to_json(s));
        for (const auto& s : bundle.refined) append_jsonl(refined_out, summary_to_json(s));
        for (const auto& t : bundle.traces) append_jsonl(traces_out, trace_to_json(t));
        if (cfg.dump_filter)
          for (const auto& d : bundle.filter_dumps) append_jsonl(filter_out, d);
      }
      auto cards_out = open_out(cfg.output_dir / kScorecardsFile);
      for (const auto& bundle : bundles)
        if (!bundle.failed)
          for (const auto& c : bundle.unrefined_cards)
            append_jsonl(cards_out, scorecard_to_json(c));
      for (const auto& bundle : bundles)
        if (!bundle.failed)
          for (const auto& c : bundle.refined_cards) append_jsonl(cards_out, scorecard_to_json(c));
      for (const auto& bundle : bundles) {
        if (bundle.failed) continue;
        all_cards.insert(all_cards.end(), bundle.unrefined_cards.begin(),
                         bundle.unrefined_cards.end());
      }
      for (const auto& bundle : bundles) {
        if (bundle.failed) continue;
        all_cards.insert(all_cards.end(), bundle.refined_cards.begin(),
                         bundle.refined_cards.end());
      }
    }

    write_manifest(cfg, digest, backend->id(), articles.size(), skipped);
    RunReport report = assemble_report(all_cards, cfg.config_hash(), digest, cfg.alpha);
    emit(report, cfg.output_dir,
         {ReportFormat::json, ReportFormat::csv, ReportFormat::markdown, ReportFormat::svg});
    return exit_code::ok;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return exit_code::fatal;
  }
}

int cmd_summarize(const RunConfig& cfg) {
  try {
    cfg.validate();
    std::vector<Article> articles = load_corpus(cfg.corpus_path, cfg.limit);
    sort_by_id(articles);
    std::string digest = corpus_digest(cfg);

    std::filesystem::create_directories(cfg.output_dir);
    std::filesystem::remove(cfg.output_dir / kAuditFile);
    auto backend = make_backend(cfg, /*probe_live=*/true);
    backend->set_audit_log(std::make_shared<AuditLog>(cfg.output_dir / kAuditFile));

    struct Result {
      std::vector<Summary> summaries;
      nlohmann::json filter_dump;
      bool failed = false;
      std::string error;
    };
    std::vector<Result> results(articles.size());
    parallel_for(cfg.workers, articles.size(), [&](std::size_t i) {
      try {
        results[i].summaries = make_unrefined(*backend, articles[i], cfg,
                                              cfg.dump_filter ? &results[i].filter_dump : nullptr);
      } catch (const std::exception& e) {
        results[i].failed = true;
        results[i].error = e.what();
      }
    });

    std::vector<std::string> skipped;
    auto out = open_out(cfg.output_dir / kSummariesFile);
    std::ofstream filter_out;
    if (cfg.dump_filter) filter_out = open_out(cfg.output_dir / kFilterFile);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].failed) {
        skipped.push_back(articles[i].id);
        std::cerr << "skipping article " << articles[i].id << ": " << results[i].error << "\n";
        continue;
      }
      for (const auto& s : results[i].summaries) append_jsonl(out, summary_to_json(s));
      if (cfg.dump_filter) append_jsonl(filter_out, results[i].filter_dump);
    }
    write_manifest(cfg, digest, backend->id(), articles.size(), skipped);
    return exit_code::ok;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return exit_code::fatal;
  }
}

int cmd_refine(const RunConfig& cfg) {
  try {
    cfg.validate();
    std::vector<Article> articles = load_corpus(cfg.corpus_path, cfg.limit);
    std::map<std::string, const Article*> by_id;
    for (const auto& a : articles) by_id[a.id] = &a;

    std::vector<Summary> summaries;
    for (const auto& j : read_jsonl(cfg.output_dir / kSummariesFile))
      summaries.push_back(summary_from_json(j));

    auto backend = make_backend(cfg, /*probe_live=*/true);
    backend->set_audit_log(std::make_shared<AuditLog>(cfg.output_dir / kAuditFile));

    struct Result {
      Summary refined;
      RefinementTrace trace;
      bool failed = false;
      std::string error;
    };
    std::vector<Result> results(summaries.size());
    parallel_for(cfg.workers, summaries.size(), [&](std::size_t i) {
      try {
        auto it = by_id.find(summaries[i].article_id);
        if (it == by_id.end())
          throw Error(ErrorKind::validation,
                      "summary references unknown article " + summaries[i].article_id);
        Refiner refiner(*backend, cfg.prompts);
        auto [refined, trace] =
            refiner.refine_loop(*it->second, summaries[i], cfg.refine_target, cfg.refine_max_iters);
        results[i].refined = std::move(refined);
        results[i].trace = std::move(trace);
      } catch (const std::exception& e) {
        results[i].failed = true;
        results[i].error = e.what();
      }
    });

    auto refined_out = open_out(cfg.output_dir / kRefinedFile);
    auto traces_out = open_out(cfg.output_dir / kTracesFile);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].failed) {
        std::cerr << "skipping summary for " << summaries[i].article_id << ": "
                  << results[i].error << "\n";
        continue;
      }
      append_jsonl(refined_out, summary_to_json(results[i].refined));
      append_jsonl(traces_out, trace_to_json(results[i].trace));
    }
    return exit_code::ok;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return exit_code::fatal;
  }
}

int cmd_evaluate(const RunConfig& cfg) {
  try {
    cfg.validate();
    std::vector<Article> articles = load_corpus(cfg.corpus_path, cfg.limit);
    std::map<std::string, const Article*> by_id;
    for (const auto& a : articles) by_id[a.id] = &a;

    std::vector<Summary> summaries;
    for (const auto& j : read_jsonl(cfg.output_dir / kSummariesFile))
      summaries.push_back(summary_from_json(j));
    if (std::filesystem::exists(cfg.output_dir / kRefinedFile))
      for (const auto& j : read_jsonl(cfg.output_dir / kRefinedFile))
        summaries.push_back(summary_from_json(j));

    auto backend = make_backend(cfg, /*probe_live=*/true);
    backend->set_audit_log(std::make_shared<AuditLog>(cfg.output_dir / kAuditFile));

    struct Result {
      ScoreCard card;
      bool failed = false;
      std::string error;
    };
    std::vector<Result> results(summaries.size());
    parallel_for(cfg.workers, summaries.size(), [&](std::size_t i) {
      try {
        auto it = by_id.find(summaries[i].article_id);
        if (it == by_id.end())
          throw Error(ErrorKind::validation,
                      "summary references unknown article " + summaries[i].article_id);
        Refiner refiner(*backend, cfg.prompts);
        MetricSuite suite(*backend, refiner, cfg.metric_prompts, cfg.num_questions);
        results[i].card =
            suite.evaluate_all(*it->second, summaries[i], cfg.enabled_metrics, cfg.rouge_against);
      } catch (const std::exception& e) {
        results[i].failed = true;
        results[i].error = e.what();
      }
    });

    auto out = open_out(cfg.output_dir / kScorecardsFile);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].failed) {
        std::cerr << "skipping evaluation for " << summaries[i].article_id << ": "
                  << results[i].error << "\n";
        continue;
      }
      append_jsonl(out, scorecard_to_json(results[i].card));
    }
    return exit_code::ok;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return exit_code::fatal;
  }
}

namespace {

std::vector<ScoreCard> load_scorecards(const RunConfig& cfg) {
  auto records = read_jsonl(cfg.output_dir / kScorecardsFile);
  if (records.empty())
    throw Error(ErrorKind::validation,
                "no scorecards in " + (cfg.output_dir / kScorecardsFile).string());
  std::vector<ScoreCard> cards;
  cards.reserve(records.size());
  for (const auto& j : records) cards.push_back(scorecard_from_json(j));
  return cards;
}

std::string digest_for_report(const RunConfig& cfg) {
  // prefer the manifest written by the generation stage; fall back to the
  // corpus file when running standalone
  auto manifest_path = cfg.output_dir / kManifestFile;
  if (std::filesystem::exists(manifest_path)) {
    nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path.string()), nullptr,
                                                    false);
    if (!manifest.is_discarded() && manifest.contains("corpus_digest"))
      return manifest["corpus_digest"].get<std::string>();
  }
  if (!cfg.corpus_path.empty() && std::filesystem::exists(cfg.corpus_path))
    return corpus_digest(cfg);
  return "";
}

}  // namespace

int cmd_stats(const RunConfig& cfg) {
  try {
    std::vector<ScoreCard> cards = load_scorecards(cfg);
    std::vector<TestResult> table = build_table(cards, nullptr, cfg.alpha);
    auto out = open_out(cfg.output_dir / "table.csv");
    out << test_table_csv(table);
    return exit_code::ok;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return exit_code::fatal;
  }
}

int cmd_report(const RunConfig& cfg) {
  try {
    std::vector<ScoreCard> cards = load_scorecards(cfg);
    RunReport report = assemble_report(cards, cfg.config_hash(), digest_for_report(cfg), cfg.alpha);
    emit(report, cfg.output_dir,
         {ReportFormat::json, ReportFormat::csv, ReportFormat::markdown, ReportFormat::svg});
    return exit_code::ok;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return exit_code::fatal;
  }
}

}  // namespace summafact
