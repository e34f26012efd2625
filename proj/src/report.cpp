#include "ctlpp/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctlpp/errors.hpp"

namespace ctlpp {

namespace {

std::string fixed(double v, int decimals = 6) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v == 0.0 ? 0.0 : v);  // no "-0.000000"
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Sequential white-to-blue ramp on [lo, hi]; diverging blue-white-red when lo < 0.
std::string color(double v, double lo, double hi) {
  if (std::isnan(v)) return "#ffffff";
  auto mix = [](int a, int b, double t) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  double t = (v - lo) / (hi - lo);
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (lo < 0) {
    if (t < 0.5) {
      const double u = t / 0.5;
      r = mix(33, 247, u); g = mix(102, 247, u); b = mix(172, 247, u);
    } else {
      const double u = (t - 0.5) / 0.5;
      r = mix(247, 178, u); g = mix(247, 24, u); b = mix(247, 43, u);
    }
  } else {
    r = mix(247, 8, t); g = mix(251, 48, t); b = mix(255, 107, t);
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

struct PanelStyle {
  double lo = 0;
  double hi = 1;
  int cell = 28;
  bool annotate = true;
  std::vector<std::string> label_colors;  // optional per-row/col label color
};

// One matrix heatmap drawn at (x0, y0) into os; returns the panel's width and height.
std::pair<int, int> draw_panel(std::ostringstream& os, int x0, int y0, const std::string& title,
                               const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                               const std::vector<std::string>& cols, const PanelStyle& style,
                               const std::string& attrs) {
  const int margin_left = 48, margin_top = 40, cell = style.cell;
  os << "<g class=\"panel\"" << attrs << ">\n";
  os << "<text x=\"" << x0 + margin_left << "\" y=\"" << y0 + 14 << "\" font-size=\"13\">" << escape_xml(title)
     << "</text>\n";
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const std::string fill = style.label_colors.empty() ? "#000000" : style.label_colors[c];
    os << "<text x=\"" << x0 + margin_left + c * cell + cell / 2 << "\" y=\"" << y0 + margin_top - 6
       << "\" font-size=\"9\" text-anchor=\"middle\" fill=\"" << fill << "\">" << escape_xml(cols[c]) << "</text>\n";
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const std::string fill = style.label_colors.empty() ? "#000000" : style.label_colors[r];
    os << "<text x=\"" << x0 + margin_left - 4 << "\" y=\"" << y0 + margin_top + r * cell + cell / 2 + 3
       << "\" font-size=\"9\" text-anchor=\"end\" fill=\"" << fill << "\">" << escape_xml(rows[r]) << "</text>\n";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      const int x = x0 + margin_left + static_cast<int>(c) * cell;
      const int y = y0 + margin_top + static_cast<int>(r) * cell;
      os << "<rect class=\"cell\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
         << "\" fill=\"" << color(v, style.lo, style.hi) << "\" stroke=\"#cccccc\" data-row=\"" << r
         << "\" data-col=\"" << c << "\" data-value=\"" << fixed(v) << "\"/>\n";
      if (style.annotate && !std::isnan(v)) {
        const double t = (v - style.lo) / (style.hi - style.lo);
        const bool dark = style.lo < 0 ? std::abs(t - 0.5) > 0.3 : t > 0.6;
        os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 3
           << "\" font-size=\"8\" text-anchor=\"middle\" fill=\"" << (dark ? "#ffffff" : "#000000") << "\">"
           << fixed(v, 2) << "</text>\n";
      }
    }
  }
  os << "</g>\n";
  return {margin_left + static_cast<int>(m.cols()) * cell + 16, margin_top + static_cast<int>(m.rows()) * cell + 16};
}

std::string svg_document(int width, int height, const std::string& body) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
     << body << "</svg>\n";
  return os.str();
}

std::vector<std::string> function_labels(std::span<const FunctionTable> tables) {
  std::vector<std::string> labels;
  for (const auto& f : tables) labels.push_back("f" + std::to_string(f.id));
  return labels;
}

void write_file(const std::filesystem::path& path, const std::string& content,
                std::vector<std::filesystem::path>& written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("write to " + path.string() + " failed");
  written.push_back(path);
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

nlohmann::ordered_json grid_json(const CompatibilityGrid& g) {
  nlohmann::ordered_json j;
  j["rows"] = g.rows;
  j["cols"] = g.cols;
  auto& cells = j["accuracy"] = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < g.accuracy.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < g.accuracy.cols(); ++c) {
      const auto v = g.cell(static_cast<int>(r), static_cast<int>(c));
      row.push_back(v ? nlohmann::ordered_json(std::stod(fixed(*v))) : nlohmann::ordered_json(nullptr));
    }
    cells.push_back(row);
  }
  return j;
}

}  // namespace

AnalysisReport analyze(const RepresentationDump<double>& dump, const PredictionDump* predictions,
                       std::span<const FunctionTable> tables, double threshold) {
  if (static_cast<int>(tables.size()) != dump.num_functions)
    throw ConfigError("dump and manifest disagree on the number of functions");
  AnalysisReport report;
  report.meta = dump.meta;
  report.threshold = threshold;
  report.tables.assign(tables.begin(), tables.end());
  const Partition groups = group_partition(tables);
  for (SymbolId s = 0; s < dump.num_symbols; ++s) {
    SymbolAnalysis a;
    a.symbol = s;
    a.cosine = cosine_matrix(dump, s);
    a.clusters = detect_clusters(a.cosine.matrix, threshold);
    report.warnings.insert(report.warnings.end(), a.cosine.warnings.begin(), a.cosine.warnings.end());
    if (predictions) {
      a.cluster_grid = compatibility_grid(*predictions, tables, s, cluster_partition(a.clusters), groups);
      a.group_grid = compatibility_grid(*predictions, tables, s, groups, groups);
    }
    report.symbols.push_back(std::move(a));
  }
  return report;
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels, const std::string& corner) {
  std::ostringstream os;
  os << corner;
  for (const auto& c : col_labels) os << ',' << c;
  os << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    os << row_labels[r];
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << ',' << fixed(m(r, c));
    os << '\n';
  }
  return os.str();
}

std::string heatmap_csv(const Heatmap& h) {
  std::vector<std::string> rows, cols;
  for (int g : h.go_sizes) rows.push_back(std::to_string(g));
  for (int x : h.shared_symbols) cols.push_back(std::to_string(x));
  return matrix_csv(h.mean_ood, rows, cols, "go_size\\shared_symbols");
}

std::string heatmap_svg(const Heatmap& h, const std::string& title) {
  std::vector<std::string> rows, cols;
  for (int g : h.go_sizes) rows.push_back(std::to_string(g));
  for (int x : h.shared_symbols) cols.push_back(std::to_string(x));
  // Rows top to bottom with the largest go_size first, like a y-axis.
  Eigen::MatrixXd flipped = h.mean_ood.colwise().reverse();
  std::reverse(rows.begin(), rows.end());
  std::ostringstream os;
  PanelStyle style;
  style.cell = 44;
  const auto [w, hgt] = draw_panel(os, 0, 0, title + " (y: functions in Go, x: shared symbols)", flipped, rows, cols,
                                   style, " data-kind=\"heatmap\"");
  return svg_document(std::max(w, 360), hgt, os.str());
}

std::string cosine_panels_svg(const AnalysisReport& report) {
  const auto labels = function_labels(report.tables);
  PanelStyle style;
  style.lo = -1;
  style.hi = 1;
  style.cell = report.tables.size() > 16 ? 14 : 24;
  style.annotate = report.tables.size() <= 16;
  for (const auto& f : report.tables) {
    const bool a = f.group == Group::Ga || f.group == Group::Ga1 || f.group == Group::Ga2;
    const bool b = f.group == Group::Gb || f.group == Group::Gb1 || f.group == Group::Gb2;
    style.label_colors.push_back(a ? "#d62728" : b ? "#1f77b4" : "#2ca02c");
  }
  const int per_row = 4;
  std::ostringstream os;
  int width = 0, height = 0, row_height = 0, x = 0, y = 0;
  for (std::size_t i = 0; i < report.symbols.size(); ++i) {
    const auto& a = report.symbols[i];
    if (i > 0 && i % per_row == 0) {
      x = 0;
      y += row_height;
      row_height = 0;
    }
    const std::string title = "symbol " + std::to_string(a.symbol) + " (" + std::to_string(num_clusters(a.clusters)) +
                              " cluster" + (num_clusters(a.clusters) == 1 ? "" : "s") + ")";
    const auto [w, h] = draw_panel(os, x, y, title, a.cosine.matrix, labels, labels, style,
                                   " data-symbol=\"" + std::to_string(a.symbol) + "\"");
    x += w;
    width = std::max(width, x);
    row_height = std::max(row_height, h);
    height = std::max(height, y + h);
  }
  return svg_document(width, height, os.str());
}

std::string compatibility_svg(const SymbolAnalysis& a) {
  std::ostringstream os;
  PanelStyle style;
  style.cell = 48;
  int x = 0, height = 0;
  for (const auto* grid : {a.cluster_grid ? &*a.cluster_grid : nullptr, a.group_grid ? &*a.group_grid : nullptr}) {
    if (!grid) continue;
    const bool clusters = grid == &*a.cluster_grid;
    const auto [w, h] = draw_panel(os, x, 0, std::string(clusters ? "cluster" : "group") + " x group, symbol " +
                                                 std::to_string(a.symbol),
                                   grid->accuracy, grid->rows, grid->cols, style,
                                   std::string(" data-kind=\"") + (clusters ? "clusters" : "groups") + "\"");
    x += w + 40;
    height = std::max(height, h);
  }
  return svg_document(std::max(x, 200), height, os.str());
}

std::string aggregate_csv(std::span<const SeedAggregate> rows) {
  std::ostringstream os;
  os << "model,variant,split,seeds,mean,std,success_rate\n";
  for (const auto& r : rows)
    os << r.model << ',' << to_string(r.variant) << ',' << r.split << ',' << r.stats.count << ','
       << fixed(r.stats.mean) << ',' << fixed(r.stats.std) << ',' << fixed(r.stats.success_rate) << '\n';
  return os.str();
}

std::string aggregate_table_text(std::span<const SeedAggregate> rows) {
  struct Line {
    std::string model, dataset, iid, ood;
  };
  std::vector<Line> lines;
  for (const auto& r : rows) {
    const std::string model = r.model.empty() ? "-" : r.model;
    const std::string dataset(to_string(r.variant));
    auto it = std::find_if(lines.begin(), lines.end(),
                           [&](const Line& l) { return l.model == model && l.dataset == dataset; });
    if (it == lines.end()) {
      lines.push_back({model, dataset, "", ""});
      it = std::prev(lines.end());
    }
    const std::string cell = fixed(r.stats.mean, 2) + " ± " + fixed(r.stats.std, 2);
    (r.split == "iid" ? it->iid : it->ood) = cell;
  }
  std::size_t model_w = 5;
  for (const auto& l : lines) model_w = std::max(model_w, l.model.size());
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };

  std::ostringstream os;
  os << pad("Model", model_w) << "  Dataset  IID          OOD\n";
  os << std::string(model_w + 34, '-') << '\n';
  std::string previous;
  for (const auto& l : lines) {
    os << pad(l.model == previous ? "" : l.model, model_w) << "  " << pad(l.dataset, 7) << "  " << pad(l.iid, 11)
       << "  " << l.ood << '\n';
    previous = l.model;
  }
  os << "(std is the population standard deviation)\n";
  return os.str();
}

std::vector<std::filesystem::path> emit_report(const AnalysisReport& report, const std::filesystem::path& out_dir) {
  prepare_dir(out_dir);
  std::vector<std::filesystem::path> written;
  const auto labels = function_labels(report.tables);

  nlohmann::ordered_json summary;
  summary["model"] = report.meta.model;
  summary["variant"] = report.meta.variant;
  summary["seed"] = report.meta.seed;
  summary["dim"] = report.meta.dim;
  summary["threshold"] = report.threshold;
  auto& per_symbol = summary["symbols"] = nlohmann::ordered_json::array();

  std::ostringstream clusters_txt;
  clusters_txt << "threshold " << fixed(report.threshold, 2) << "\n";
  for (const auto& a : report.symbols) {
    const std::string s = std::to_string(a.symbol);
    write_file(out_dir / ("cosine_symbol_" + s + ".csv"), matrix_csv(a.cosine.matrix, labels, labels, "f"), written);

    nlohmann::ordered_json entry;
    entry["symbol"] = a.symbol;
    entry["num_clusters"] = num_clusters(a.clusters);
    entry["clusters"] = a.clusters;
    entry["zero_norm"] = a.cosine.zero_norm;

    clusters_txt << "symbol " << s << ": " << num_clusters(a.clusters) << " cluster(s)\n";
    for (int c = 0; c < num_clusters(a.clusters); ++c) {
      clusters_txt << "  C" << c + 1 << ":";
      for (std::size_t f = 0; f < a.clusters.size(); ++f)
        if (a.clusters[f] == c) clusters_txt << " f" << f << "(" << to_string(report.tables[f].group) << ")";
      clusters_txt << "\n";
    }

    if (a.cluster_grid && a.group_grid) {
      write_file(out_dir / ("compat_clusters_symbol_" + s + ".csv"),
                 matrix_csv(a.cluster_grid->accuracy, a.cluster_grid->rows, a.cluster_grid->cols, "cluster\\group"),
                 written);
      write_file(out_dir / ("compat_groups_symbol_" + s + ".csv"),
                 matrix_csv(a.group_grid->accuracy, a.group_grid->rows, a.group_grid->cols, "group\\group"), written);
      write_file(out_dir / ("compat_symbol_" + s + ".svg"), compatibility_svg(a), written);
      entry["cluster_grid"] = grid_json(*a.cluster_grid);
      entry["group_grid"] = grid_json(*a.group_grid);
    }
    per_symbol.push_back(entry);
  }
  summary["warnings"] = report.warnings;
  write_file(out_dir / "cosine.svg", cosine_panels_svg(report), written);
  write_file(out_dir / "clusters.txt", clusters_txt.str(), written);
  write_file(out_dir / "analysis.json", summary.dump(2) + "\n", written);
  return written;
}

std::vector<std::filesystem::path> emit_metrics_report(std::span<const SeedMetrics> metrics,
                                                       const std::filesystem::path& out_dir,
                                                       double success_threshold, bool converged_only) {
  prepare_dir(out_dir);
  std::vector<std::filesystem::path> written;
  const auto rows = aggregate_seeds(metrics, success_threshold, converged_only);
  write_file(out_dir / "aggregate.csv", aggregate_csv(rows), written);
  write_file(out_dir / "aggregate.txt", aggregate_table_text(rows), written);

  std::ostringstream report;
  report << "seeds: " << metrics.size() << (converged_only ? " (converged only)" : "") << "\n";
  report << "success threshold: " << fixed(success_threshold, 2) << " (strictly above)\n";
  for (const auto& r : rows)
    report << "  " << (r.model.empty() ? "-" : r.model) << " " << to_string(r.variant) << " " << r.split
           << ": success rate " << fixed(r.stats.success_rate, 2) << " over " << r.stats.count << " seeds\n";

  const bool any_grid = std::any_of(metrics.begin(), metrics.end(),
                                    [](const SeedMetrics& m) { return m.go_size && m.shared_symbols; });
  if (any_grid) {
    const Heatmap h = heatmap_table(metrics);
    write_file(out_dir / "heatmap.csv", heatmap_csv(h), written);
    write_file(out_dir / "heatmap.svg", heatmap_svg(h), written);
    report << "heatmap: " << h.go_sizes.size() << " x " << h.shared_symbols.size() << " cells, "
           << h.missing.size() << " missing\n";
    for (const auto& [g, x] : h.missing) report << "  missing cell go_size=" << g << " shared_symbols=" << x << "\n";
  }
  write_file(out_dir / "report.txt", report.str(), written);
  return written;
}

}  // namespace ctlpp
