#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "summafact/backend.hpp"
#include "summafact/corpus.hpp"
#include "summafact/errors.hpp"
#include "summafact/filter.hpp"
#include "summafact/metrics.hpp"
#include "summafact/pipeline.hpp"
#include "summafact/refine.hpp"
#include "summafact/report.hpp"
#include "summafact/stats.hpp"
#include "summafact/summarize.hpp"

namespace py = pybind11;
using namespace summafact;

namespace {

py::dict test_result_dict(const TestResult& r) {
  py::dict d;
  d["metric"] = r.metric;
  d["mean_before"] = r.mean_before;
  d["mean_after"] = r.mean_after;
  d["t_stat"] = r.t_stat;
  d["df"] = r.df;
  d["p_value"] = r.p_value;
  d["ci95"] = py::make_tuple(r.ci95.first, r.ci95.second);
  d["reject_null"] = r.reject_null;
  d["degenerate"] = r.degenerate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_summafact, m) {
  m.doc() = "summafact core operations";

  py::register_exception<Error>(m, "SummafactError");

  // corpus
  m.def("preprocess", [](const std::string& raw) { return preprocess(raw); });
  m.def("sentence_split", [](const std::string& text) {
    SentenceList list = sentence_split(text);
    return list.sentences;
  });
  m.def("load_corpus",
        [](const std::string& path, std::optional<std::size_t> limit) {
          std::vector<py::dict> out;
          for (const auto& a : load_corpus(path, limit)) {
            py::dict d;
            d["id"] = a.id;
            d["body"] = a.body;
            d["reference"] = a.reference;
            out.push_back(std::move(d));
          }
          return out;
        },
        py::arg("path"), py::arg("limit") = std::nullopt);

  // filter
  m.def("tokenize", [](const std::string& text) {
    TokenizedText t = tokenize(text);
    return py::make_tuple(t.tokens, t.normalized);
  });
  m.def("cosine", [](const std::vector<double>& a, const std::vector<double>& b) {
    return cosine(EmbeddingVector{a}, EmbeddingVector{b});
  });

  // ROUGE
  m.def("rouge_n", [](const std::string& cand, const std::string& ref, int n) {
    RougeScore s = rouge_n(cand, ref, n);
    return py::make_tuple(s.precision, s.recall, s.f1);
  });
  m.def("rouge_l", [](const std::string& cand, const std::string& ref) {
    RougeScore s = rouge_l(cand, ref);
    return py::make_tuple(s.precision, s.recall, s.f1);
  });

  // stats
  m.def("paired_t_test",
        [](const std::vector<double>& before, const std::vector<double>& after) {
          PairedSample sample;
          sample.metric = "sample";
          sample.before = before;
          sample.after = after;
          return test_result_dict(paired_t_test(sample));
        });
  m.def("pearson_r", [](const std::vector<double>& x, const std::vector<double>& y) {
    return pearson_r(x, y);
  });
  m.def("linear_fit", [](const std::vector<double>& x, const std::vector<double>& y) {
    FitResult f = linear_fit(x, y);
    return py::make_tuple(f.slope, f.intercept, f.r);
  });
  m.def("student_t_cdf", &student_t_cdf);

  // mock backend + filter + refinement, for offline experimentation
  py::class_<MockBackend, std::shared_ptr<MockBackend>>(m, "MockBackend")
      .def(py::init([](const std::string& script_path) {
        return MockBackend::from_script(script_path);
      }))
      .def("chat",
           [](MockBackend& b, const std::string& prompt) {
             ChatRequest req;
             req.user = prompt;
             return b.chat(req).text;
           })
      .def("embed", [](MockBackend& b, const std::vector<std::string>& texts) {
        std::vector<std::vector<double>> out;
        for (auto& v : b.embed(texts)) out.push_back(std::move(v.values));
        return out;
      });

  m.def("reduce_hallucination",
        [](std::shared_ptr<MockBackend> backend, const std::string& original,
           const std::string& summary, double threshold) {
          FilterResult r = reduce_hallucination(*backend, original, summary, threshold);
          py::dict d;
          d["text"] = r.text;
          d["kept"] = r.outcome.kept;
          d["dropped"] = r.outcome.dropped;
          d["threshold"] = r.outcome.threshold;
          return d;
        },
        py::arg("backend"), py::arg("original"), py::arg("summary"), py::arg("threshold") = 0.5);

  m.def("refine_loop",
        [](std::shared_ptr<MockBackend> backend, const std::string& article_id,
           const std::string& body, const std::string& summary_text, int target, int max_iters) {
          Article article{article_id, body, ""};
          Summary summary;
          summary.article_id = article_id;
          summary.method = Method::abstractive;
          summary.text = summary_text;
          Refiner refiner(*backend);
          auto [refined, trace] = refiner.refine_loop(article, summary, target, max_iters);
          py::dict d;
          d["final_text"] = trace.final_text;
          d["terminated_by"] = std::string(to_string(trace.terminated_by));
          d["iterations"] = trace.iterations.size();
          return d;
        },
        py::arg("backend"), py::arg("article_id"), py::arg("body"), py::arg("summary_text"),
        py::arg("target") = 10, py::arg("max_iters") = 3);

  m.def("default_prompts", [] {
    PromptCatalog catalog = PromptCatalog::defaults();
    py::dict d;
    d["basic_validation"] = catalog.basic_validation;
    d["detailed_analysis"] = catalog.detailed_analysis;
    d["scoring"] = catalog.scoring;
    d["refinement"] = catalog.refinement;
    d["final_verification"] = catalog.final_verification;
    return d;
  });

  // whole pipeline from a config mapping (same schema as the CLI config file)
  m.def("run_pipeline", [](const std::string& config_json) {
    nlohmann::json j = nlohmann::json::parse(config_json);
    return cmd_run(RunConfig::from_json(j));
  });
}
