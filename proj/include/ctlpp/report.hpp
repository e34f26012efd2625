#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlpp/analyzer.hpp"

namespace ctlpp {

/// Per-symbol results of the representation analysis.
struct SymbolAnalysis {
  SymbolId symbol = 0;
  CosineResult cosine;
  std::vector<int> clusters;
  std::optional<CompatibilityGrid> cluster_grid;  // rows: clusters, cols: groups
  std::optional<CompatibilityGrid> group_grid;    // rows: groups, cols: groups
};

struct AnalysisReport {
  DumpMeta meta;
  double threshold = 0.8;
  std::vector<FunctionTable> tables;
  std::vector<SymbolAnalysis> symbols;
  std::vector<std::string> warnings;
};

/// Cosine matrices and clusters for every output symbol, plus compatibility
/// grids when predictions are given.
AnalysisReport analyze(const RepresentationDump<double>& dump, const PredictionDump* predictions,
                       std::span<const FunctionTable> tables, double threshold = 0.8);

// Text renderings. Numbers use fixed 6-decimal formatting; NaN becomes an empty CSV field.
std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels, const std::string& corner = "");
std::string heatmap_csv(const Heatmap& h);
std::string heatmap_svg(const Heatmap& h, const std::string& title = "mean OOD accuracy");
std::string cosine_panels_svg(const AnalysisReport& report);
std::string compatibility_svg(const SymbolAnalysis& analysis);
std::string aggregate_csv(std::span<const SeedAggregate> rows);
/// Model | Dataset | IID | OOD with "mean ± std" cells.
std::string aggregate_table_text(std::span<const SeedAggregate> rows);

/// Writes the analysis files into out_dir (created if needed) and returns their paths:
/// cosine_symbol_<s>.csv, cosine.svg, clusters.txt, analysis.json, and with
/// predictions compat_clusters_symbol_<s>.csv, compat_groups_symbol_<s>.csv,
/// compat_symbol_<s>.svg.
std::vector<std::filesystem::path> emit_report(const AnalysisReport& report, const std::filesystem::path& out_dir);

/// Writes aggregate.csv, aggregate.txt, report.txt and, when variant-S
/// metrics carry overlap parameters, heatmap.csv and heatmap.svg.
std::vector<std::filesystem::path> emit_metrics_report(std::span<const SeedMetrics> metrics,
                                                       const std::filesystem::path& out_dir,
                                                       double success_threshold = 0.95,
                                                       bool converged_only = false);

}  // namespace ctlpp
