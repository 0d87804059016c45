#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "summafact/metrics.hpp"
#include "summafact/stats.hpp"

namespace summafact {

struct MeanEntry {
  std::string metric;
  std::string stage;
  std::string method;  // "extractive" | "abstractive" | "hybrid" | "all"
  double mean = 0.0;
  std::size_t n = 0;
};

struct RunReport {
  std::string run_id;
  std::string config_hash;
  std::vector<MeanEntry> per_metric_means;
  std::vector<TestResult> test_table;
  std::optional<FitResult> correlation;
  std::vector<std::pair<double, double>> correlation_points;  // (mean before, mean after)
  std::string traces_path;
  TableDiagnostics diagnostics;
  std::vector<std::string> notes;
};

enum class ReportFormat { json, csv, markdown, svg };

/// Arithmetic mean per (metric, stage, method) plus a per-(metric, stage)
/// overall row with method = "all". Deterministic ordering.
std::vector<MeanEntry> aggregate(const std::vector<ScoreCard>& scorecards);

/// (mean before, mean after) per (metric, method) group that has both
/// stages; feeds the correlation fit and the scatter plot.
std::vector<std::pair<double, double>> mean_pairs(const std::vector<MeanEntry>& means);

/// Writes the selected artifacts into out_dir and returns the paths:
/// report.json, table.csv, report.md, bars.svg, scatter.svg. Emission is
/// byte-deterministic (fixed ordering, 4-decimal floats, 800x500 SVG).
std::vector<std::filesystem::path> emit(const RunReport& report,
                                        const std::filesystem::path& out_dir,
                                        const std::set<ReportFormat>& formats);

}  // namespace summafact
