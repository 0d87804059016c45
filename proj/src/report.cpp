#include "summafact/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "summafact/errors.hpp"
#include "summafact/pipeline.hpp"
#include "summafact/util.hpp"

namespace summafact {

namespace {

const std::vector<std::string>& method_order() {
  static const std::vector<std::string> order = {"extractive", "abstractive", "hybrid", "all"};
  return order;
}

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order = {"unrefined", "refined"};
  return order;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << content;
}

}  // namespace

std::vector<MeanEntry> aggregate(const std::vector<ScoreCard>& scorecards) {
  if (scorecards.empty())
    throw Error(ErrorKind::precondition, "aggregate requires at least one scorecard");

  // (metric, stage, method) -> (sum, n); method "all" accumulates everything
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& card : scorecards) {
    for (const auto& [metric, value] : card.scores) {
      acc[{metric, to_string(card.stage), to_string(card.method)}].first += value;
      acc[{metric, to_string(card.stage), to_string(card.method)}].second += 1;
      acc[{metric, to_string(card.stage), "all"}].first += value;
      acc[{metric, to_string(card.stage), "all"}].second += 1;
    }
  }

  std::vector<MeanEntry> means;
  for (const auto& metric : metric_names()) {
    for (const auto& stage : stage_order()) {
      for (const auto& method : method_order()) {
        auto it = acc.find({metric, stage, method});
        if (it == acc.end()) continue;
        means.push_back({metric, stage, method,
                         it->second.first / static_cast<double>(it->second.second),
                         it->second.second});
      }
    }
  }
  return means;
}

std::vector<std::pair<double, double>> mean_pairs(const std::vector<MeanEntry>& means) {
  auto lookup = [&](const std::string& metric, const std::string& stage,
                    const std::string& method) -> const MeanEntry* {
    for (const auto& m : means)
      if (m.metric == metric && m.stage == stage && m.method == method) return &m;
    return nullptr;
  };

  std::vector<std::pair<double, double>> points;
  for (const auto& metric : metric_names()) {
    for (const auto& method : method_order()) {
      if (method == "all") continue;  // per-method points only, no double counting
      const MeanEntry* pre = lookup(metric, "unrefined", method);
      const MeanEntry* post = lookup(metric, "refined", method);
      if (pre && post) points.emplace_back(pre->mean, post->mean);
    }
  }
  return points;
}

// ---------------------------------------------------------------------------
// emission
// ---------------------------------------------------------------------------

namespace {

nlohmann::json report_json(const RunReport& report) {
  nlohmann::json j;
  j["run_id"] = report.run_id;
  j["config_hash"] = report.config_hash;
  j["traces_path"] = report.traces_path;

  nlohmann::json means = nlohmann::json::array();
  for (const auto& m : report.per_metric_means)
    means.push_back({{"metric", m.metric},
                     {"stage", m.stage},
                     {"method", m.method},
                     {"mean", round_to(m.mean)},
                     {"n", m.n}});
  j["means"] = means;

  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : report.test_table) table.push_back(test_result_to_json(r));
  j["test_table"] = table;

  if (report.correlation) {
    j["correlation"] = {{"r", round_to(report.correlation->r)},
                        {"slope", round_to(report.correlation->slope)},
                        {"intercept", round_to(report.correlation->intercept)}};
  } else {
    j["correlation"] = nullptr;
  }
  nlohmann::json points = nlohmann::json::array();
  for (const auto& [pre, post] : report.correlation_points)
    points.push_back({round_to(pre), round_to(post)});
  j["correlation_points"] = points;

  j["diagnostics"] = {{"dropped_unmatched", report.diagnostics.dropped_unmatched},
                      {"omitted_metrics", report.diagnostics.omitted_metrics}};
  j["notes"] = report.notes;
  return j;
}

std::string report_markdown(const RunReport& report) {
  std::string md;
  md += "# Run report\n\n";
  md += "- run id: `" + report.run_id + "`\n";
  md += "- config hash: `" + report.config_hash + "`\n\n";

  md += "## Mean scores\n\n";
  if (report.per_metric_means.empty()) {
    md += "_no scores aggregated_\n\n";
  } else {
    md += "| metric | stage | method | mean | n |\n";
    md += "|---|---|---|---|---|\n";
    for (const auto& m : report.per_metric_means) {
      md += "| " + m.metric + " | " + m.stage + " | " + m.method + " | " +
            format_fixed(m.mean) + " | " + std::to_string(m.n) + " |\n";
    }
    md += "\n";
  }

  md += "## Hypothesis tests\n\n";
  if (report.test_table.empty()) {
    md += "_no matched before/after pairs_\n\n";
  } else {
    md += "| metric | avg before | avg after | p-value | 95% CI | reject null? |\n";
    md += "|---|---|---|---|---|---|\n";
    for (const auto& r : report.test_table) {
      md += "| " + r.metric + " | " + format_fixed(r.mean_before) + " | " +
            format_fixed(r.mean_after) + " | " + format_fixed(r.p_value) + " | (" +
            format_fixed(r.ci95.first) + ", " + format_fixed(r.ci95.second) + ") | " +
            (r.reject_null ? "yes" : "no") + " |\n";
    }
    md += "\n";
  }

  md += "## Correlation\n\n";
  if (report.correlation) {
    md += "fit: y = " + format_fixed(report.correlation->slope) + "x + " +
          format_fixed(report.correlation->intercept) +
          ", r = " + format_fixed(report.correlation->r) + " over " +
          std::to_string(report.correlation_points.size()) + " mean pairs\n\n";
  } else {
    md += "_not computed_\n\n";
  }

  if (!report.notes.empty()) {
    md += "## Notes\n\n";
    for (const auto& note : report.notes) md += "- " + note + "\n";
  }
  return md;
}

constexpr double kSvgW = 800.0;
constexpr double kSvgH = 500.0;
constexpr double kMarginLeft = 60.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 30.0;
constexpr double kMarginBottom = 60.0;

std::string svg_open() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
         "viewBox=\"0 0 800 500\" font-family=\"sans-serif\" font-size=\"12\">\n";
}

std::string svg_axes(const std::string& x_label, const std::string& y_label) {
  double x0 = kMarginLeft;
  double y0 = kSvgH - kMarginBottom;
  double x1 = kSvgW - kMarginRight;
  double y1 = kMarginTop;
  std::string s;
  s += "<line x1=\"" + format_fixed(x0, 2) + "\" y1=\"" + format_fixed(y0, 2) + "\" x2=\"" +
       format_fixed(x1, 2) + "\" y2=\"" + format_fixed(y0, 2) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + format_fixed(x0, 2) + "\" y1=\"" + format_fixed(y0, 2) + "\" x2=\"" +
       format_fixed(x0, 2) + "\" y2=\"" + format_fixed(y1, 2) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double frac = i / 4.0;
    double y = y0 - frac * (y0 - y1);
    s += "<text x=\"" + format_fixed(x0 - 8, 2) + "\" y=\"" + format_fixed(y + 4, 2) +
         "\" text-anchor=\"end\">" + format_fixed(frac, 2) + "</text>\n";
    s += "<line x1=\"" + format_fixed(x0 - 4, 2) + "\" y1=\"" + format_fixed(y, 2) + "\" x2=\"" +
         format_fixed(x0, 2) + "\" y2=\"" + format_fixed(y, 2) + "\" stroke=\"black\"/>\n";
  }
  s += "<text x=\"" + format_fixed((x0 + x1) / 2, 2) + "\" y=\"" + format_fixed(kSvgH - 12, 2) +
       "\" text-anchor=\"middle\">" + x_label + "</text>\n";
  s += "<text x=\"16\" y=\"" + format_fixed((y0 + y1) / 2, 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + format_fixed((y0 + y1) / 2, 2) +
       ")\">" + y_label + "</text>\n";
  return s;
}

std::string bars_svg(const RunReport& report) {
  // grouped bars: per metric, overall unrefined vs refined means
  struct Group {
    std::string metric;
    double before = 0.0;
    double after = 0.0;
    bool has_before = false;
    bool has_after = false;
  };
  std::vector<Group> groups;
  for (const auto& metric : metric_names()) {
    Group g;
    g.metric = metric;
    for (const auto& m : report.per_metric_means) {
      if (m.metric != metric || m.method != "all") continue;
      if (m.stage == "unrefined") {
        g.before = m.mean;
        g.has_before = true;
      } else {
        g.after = m.mean;
        g.has_after = true;
      }
    }
    if (g.has_before || g.has_after) groups.push_back(g);
  }

  std::string s = svg_open();
  s += "<title>Mean metric scores before and after refinement</title>\n";
  s += svg_axes("metric", "mean score");

  double x0 = kMarginLeft;
  double y0 = kSvgH - kMarginBottom;
  double plot_w = kSvgW - kMarginLeft - kMarginRight;
  double plot_h = y0 - kMarginTop;
  double group_w = groups.empty() ? plot_w : plot_w / static_cast<double>(groups.size());
  double bar_w = group_w * 0.32;

  auto bar = [&](double x, double value, const char* fill) {
    double h = value * plot_h;
    return "<rect class=\"bar\" x=\"" + format_fixed(x, 2) + "\" y=\"" +
           format_fixed(y0 - h, 2) + "\" width=\"" + format_fixed(bar_w, 2) + "\" height=\"" +
           format_fixed(h, 2) + "\" fill=\"" + fill + "\"/>\n";
  };

  for (std::size_t i = 0; i < groups.size(); ++i) {
    double gx = x0 + group_w * static_cast<double>(i);
    double cx = gx + group_w / 2.0;
    if (groups[i].has_before) s += bar(cx - bar_w - 2, groups[i].before, "#8a8a8a");
    if (groups[i].has_after) s += bar(cx + 2, groups[i].after, "#4a90d9");
    s += "<text x=\"" + format_fixed(cx, 2) + "\" y=\"" + format_fixed(y0 + 16, 2) +
         "\" text-anchor=\"middle\">" + groups[i].metric + "</text>\n";
  }

  // legend
  s += "<rect x=\"620\" y=\"10\" width=\"12\" height=\"12\" fill=\"#8a8a8a\"/>\n";
  s += "<text x=\"638\" y=\"20\">unrefined</text>\n";
  s += "<rect x=\"710\" y=\"10\" width=\"12\" height=\"12\" fill=\"#4a90d9\"/>\n";
  s += "<text x=\"728\" y=\"20\">refined</text>\n";
  s += "</svg>\n";
  return s;
}

std::string scatter_svg(const RunReport& report) {
  std::string s = svg_open();
  s += "<title>Pre- vs post-refinement mean scores</title>\n";
  s += svg_axes("mean score before refinement", "mean score after refinement");

  double x0 = kMarginLeft;
  double y0 = kSvgH - kMarginBottom;
  double plot_w = kSvgW - kMarginLeft - kMarginRight;
  double plot_h = y0 - kMarginTop;
  auto sx = [&](double v) { return x0 + v * plot_w; };
  auto sy = [&](double v) { return y0 - v * plot_h; };

  if (report.correlation) {
    const FitResult& fit = *report.correlation;
    double ya = fit.intercept;
    double yb = fit.slope + fit.intercept;
    s += "<line class=\"fit\" x1=\"" + format_fixed(sx(0.0), 2) + "\" y1=\"" +
         format_fixed(sy(std::clamp(ya, 0.0, 1.0)), 2) + "\" x2=\"" + format_fixed(sx(1.0), 2) +
         "\" y2=\"" + format_fixed(sy(std::clamp(yb, 0.0, 1.0)), 2) +
         "\" stroke=\"#d95f4a\" stroke-width=\"2\"/>\n";
  }
  for (const auto& [pre, post] : report.correlation_points) {
    s += "<circle class=\"pt\" cx=\"" + format_fixed(sx(pre), 2) + "\" cy=\"" +
         format_fixed(sy(post), 2) + "\" r=\"4\" fill=\"#4a90d9\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace

std::vector<std::filesystem::path> emit(const RunReport& report,
                                        const std::filesystem::path& out_dir,
                                        const std::set<ReportFormat>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec && !std::filesystem::is_directory(out_dir))
    throw Error(ErrorKind::io, "cannot create output dir " + out_dir.string());

  std::vector<std::filesystem::path> written;
  if (formats.count(ReportFormat::json)) {
    auto path = out_dir / "report.json";
    write_text(path, report_json(report).dump(2) + "\n");
    written.push_back(path);
  }
  if (formats.count(ReportFormat::csv)) {
    auto path = out_dir / "table.csv";
    write_text(path, test_table_csv(report.test_table));
    written.push_back(path);
  }
  if (formats.count(ReportFormat::markdown)) {
    auto path = out_dir / "report.md";
    write_text(path, report_markdown(report));
    written.push_back(path);
  }
  if (formats.count(ReportFormat::svg)) {
    auto bars = out_dir / "bars.svg";
    write_text(bars, bars_svg(report));
    written.push_back(bars);
    auto scatter = out_dir / "scatter.svg";
    write_text(scatter, scatter_svg(report));
    written.push_back(scatter);
  }
  return written;
}

}  // namespace summafact
