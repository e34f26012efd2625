#include "ctlpp/analyzer.hpp"

#include <fstream>
#include <limits>
#include <set>

#include "ctlpp/errors.hpp"

namespace ctlpp {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

nlohmann::json parse_line(const std::string& text, long line) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw ParseError("not valid JSON", line);
  }
}

DumpMeta parse_meta(const nlohmann::json& j, long line) {
  DumpMeta meta;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "model") meta.model = value.get<std::string>();
      else if (key == "variant") meta.variant = value.get<std::string>();
      else if (key == "seed") meta.seed = value.get<std::uint64_t>();
      else if (key == "dim") meta.dim = value.get<int>();
      else meta.extra[key] = value;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad meta line: ") + e.what(), line);
  }
  return meta;
}

nlohmann::ordered_json meta_json(const DumpMeta& meta) {
  nlohmann::ordered_json j;
  j["model"] = meta.model;
  j["variant"] = meta.variant;
  j["seed"] = meta.seed;
  j["dim"] = meta.dim;
  for (const auto& [key, value] : meta.extra.items()) j[key] = value;
  return j;
}

}  // namespace

RepresentationDump<double> read_representation_dump(const std::filesystem::path& path, int num_functions,
                                                    int num_symbols) {
  auto in = open_input(path);
  std::string text;
  if (!std::getline(in, text)) throw ParseError("empty representation dump", 1);
  RepresentationDump<double> dump;
  dump.meta = parse_meta(parse_line(text, 1), 1);
  if (dump.meta.dim <= 0) throw ParseError("meta.dim must be positive", 1);
  dump.num_functions = num_functions;
  dump.num_symbols = num_symbols;
  dump.entries.assign(static_cast<std::size_t>(num_functions) * num_symbols, {});
  std::vector<bool> filled(dump.entries.size(), false);

  long line = 1;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const auto j = parse_line(text, line);
    FunctionId f = 0;
    SymbolId s = 0;
    std::vector<double> values;
    try {
      f = j.at("function").get<FunctionId>();
      s = j.at("symbol").get<SymbolId>();
      values = j.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad dump record: ") + e.what(), line);
    }
    if (f < 0 || f >= num_functions || s < 0 || s >= num_symbols)
      throw ParseError("entry (" + std::to_string(f) + ", " + std::to_string(s) + ") is outside the task", line);
    if (static_cast<int>(values.size()) != dump.meta.dim)
      throw ParseError("vector has " + std::to_string(values.size()) + " components, dim is " +
                       std::to_string(dump.meta.dim), line);
    for (double v : values)
      if (!std::isfinite(v)) throw ParseError("non-finite vector component", line);
    const std::size_t idx = static_cast<std::size_t>(f) * num_symbols + s;
    if (filled[idx]) throw ParseError("duplicate entry (" + std::to_string(f) + ", " + std::to_string(s) + ")", line);
    filled[idx] = true;
    dump.entries[idx] = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  }
  const long missing = std::count(filled.begin(), filled.end(), false);
  if (missing > 0) throw ParseError("representation dump misses " + std::to_string(missing) + " (function, symbol) entries");
  return dump;
}

void write_representation_dump(const RepresentationDump<double>& dump, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << meta_json(dump.meta).dump() << '\n';
  for (FunctionId f = 0; f < dump.num_functions; ++f) {
    for (SymbolId s = 0; s < dump.num_symbols; ++s) {
      const auto& v = dump.at(f, s);
      nlohmann::ordered_json j;
      j["function"] = f;
      j["symbol"] = s;
      j["vector"] = std::vector<double>(v.data(), v.data() + v.size());
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

PredictionDump read_prediction_dump(const std::filesystem::path& path, int num_functions, int num_symbols) {
  auto in = open_input(path);
  PredictionDump dump;
  std::string text;
  long line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const auto j = parse_line(text, line);
    if (line == 1 && !j.contains("f1")) {
      dump.meta = parse_meta(j, line);
      continue;
    }
    PredictionRecord r;
    try {
      r.f1 = j.at("f1").get<FunctionId>();
      r.f2 = j.at("f2").get<FunctionId>();
      r.input = j.at("input").get<SymbolId>();
      r.pred = j.at("pred").get<SymbolId>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad prediction record: ") + e.what(), line);
    }
    if (r.f1 < 0 || r.f1 >= num_functions || r.f2 < 0 || r.f2 >= num_functions || r.input < 0 ||
        r.input >= num_symbols || r.pred < 0 || r.pred >= num_symbols)
      throw ParseError("prediction record outside the task's functions/symbols", line);
    dump.records.push_back(r);
  }
  return dump;
}

void write_prediction_dump(const PredictionDump& dump, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << meta_json(dump.meta).dump() << '\n';
  for (const auto& r : dump.records) {
    nlohmann::ordered_json j;
    j["f1"] = r.f1;
    j["f2"] = r.f2;
    j["input"] = r.input;
    j["pred"] = r.pred;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

SeedMetrics parse_seed_metrics(const nlohmann::json& j) {
  SeedMetrics m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.iid = j.at("iid").get<double>();
    m.ood = j.at("ood").get<double>();
    m.steps = j.at("steps").get<long>();
    m.converged = j.at("converged").get<bool>();
    if (j.contains("model") && !j.at("model").is_null()) m.model = j.at("model").get<std::string>();
    if (j.contains("go_size") && !j.at("go_size").is_null()) m.go_size = j.at("go_size").get<int>();
    if (j.contains("shared_symbols") && !j.at("shared_symbols").is_null())
      m.shared_symbols = j.at("shared_symbols").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad metrics record: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  if (!(m.iid >= 0 && m.iid <= 1) || !(m.ood >= 0 && m.ood <= 1))
    throw ParseError("accuracies must lie in [0, 1]");
  return m;
}

nlohmann::ordered_json to_json(const SeedMetrics& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  if (!m.model.empty()) j["model"] = m.model;
  j["variant"] = std::string(to_string(m.variant));
  j["iid"] = m.iid;
  j["ood"] = m.ood;
  j["steps"] = m.steps;
  j["converged"] = m.converged;
  j["go_size"] = m.go_size ? nlohmann::ordered_json(*m.go_size) : nlohmann::ordered_json(nullptr);
  j["shared_symbols"] = m.shared_symbols ? nlohmann::ordered_json(*m.shared_symbols) : nlohmann::ordered_json(nullptr);
  return j;
}

std::vector<SeedMetrics> read_seed_metrics(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<SeedMetrics> out;
  std::string text;
  long line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    try {
      out.push_back(parse_seed_metrics(parse_line(text, line)));
    } catch (const ParseError& e) {
      if (e.line() > 0) throw;
      throw ParseError(e.what(), line);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CosineResult cosine_matrix(const RepresentationDump<double>& dump, SymbolId symbol) {
  CosineResult result;
  std::vector<int> zero;
  result.matrix = cosine_similarity(dump.rows_for_symbol(symbol), &zero);
  result.zero_norm.assign(zero.begin(), zero.end());
  for (FunctionId f : result.zero_norm)
    result.warnings.push_back("symbol " + std::to_string(symbol) + ": representation from f" + std::to_string(f) +
                              " has zero norm; its cosines are reported as 0");
  return result;
}

Partition group_partition(std::span<const FunctionTable> tables) {
  Partition p;
  std::map<Group, int> index;
  for (const auto& f : tables) {
    auto [it, inserted] = index.try_emplace(f.group, static_cast<int>(p.labels.size()));
    if (inserted) p.labels.emplace_back(to_string(f.group));
    p.of.push_back(it->second);
  }
  return p;
}

Partition cluster_partition(const std::vector<int>& clusters) {
  Partition p;
  for (int c = 0; c < num_clusters(clusters); ++c) p.labels.push_back("C" + std::to_string(c + 1));
  p.of = clusters;
  return p;
}

CompatibilityGrid compatibility_grid(const PredictionDump& predictions, std::span<const FunctionTable> tables,
                                     SymbolId symbol, const Partition& row_partition,
                                     const Partition& col_partition) {
  const int nf = static_cast<int>(tables.size());
  const int ns = tables.empty() ? 0 : tables.front().num_symbols();
  std::vector<int> lookup(static_cast<std::size_t>(nf) * nf * ns, -1);
  for (const auto& r : predictions.records) lookup[(static_cast<std::size_t>(r.f1) * nf + r.f2) * ns + r.input] = r.pred;

  CompatibilityGrid grid;
  grid.rows = row_partition.labels;
  grid.cols = col_partition.labels;
  const auto nr = static_cast<Eigen::Index>(grid.rows.size());
  const auto nc = static_cast<Eigen::Index>(grid.cols.size());
  Eigen::MatrixXd correct = Eigen::MatrixXd::Zero(nr, nc);
  grid.pairs = Eigen::MatrixXi::Zero(nr, nc);

  for (FunctionId f1 = 0; f1 < nf; ++f1) {
    const int r = row_partition.of.at(f1);
    if (r < 0) continue;
    const SymbolId input = apply_inverse(tables[f1], symbol);
    for (FunctionId f2 = 0; f2 < nf; ++f2) {
      const int c = col_partition.of.at(f2);
      if (c < 0) continue;
      const int pred = lookup[(static_cast<std::size_t>(f1) * nf + f2) * ns + input];
      if (pred < 0) continue;
      grid.pairs(r, c) += 1;
      correct(r, c) += pred == apply(tables[f2], symbol) ? 1.0 : 0.0;
    }
  }
  grid.accuracy = Eigen::MatrixXd::Constant(nr, nc, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index r = 0; r < nr; ++r)
    for (Eigen::Index c = 0; c < nc; ++c)
      if (grid.pairs(r, c) > 0) grid.accuracy(r, c) = correct(r, c) / grid.pairs(r, c);
  return grid;
}

// ---------------------------------------------------------------------------

SummaryStats summarize(std::span<const double> values, double success_threshold) {
  SummaryStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  const Eigen::Map<const Eigen::ArrayXd> v(values.data(), values.size());
  s.mean = v.mean();
  s.std = std::sqrt((v - s.mean).square().mean());
  s.success_rate = static_cast<double>((v > success_threshold).count()) / values.size();
  return s;
}

std::vector<SeedAggregate> aggregate_seeds(std::span<const SeedMetrics> metrics, double success_threshold,
                                           bool converged_only) {
  std::vector<std::pair<std::string, Variant>> keys;
  std::map<std::pair<std::string, Variant>, std::pair<std::vector<double>, std::vector<double>>> values;
  for (const auto& m : metrics) {
    if (converged_only && !m.converged) continue;
    const auto key = std::make_pair(m.model, m.variant);
    if (!values.count(key)) keys.push_back(key);
    values[key].first.push_back(m.iid);
    values[key].second.push_back(m.ood);
  }
  std::vector<SeedAggregate> out;
  for (const auto& key : keys) {
    const auto& [iid, ood] = values.at(key);
    out.push_back({key.first, key.second, "iid", summarize(iid, success_threshold)});
    out.push_back({key.first, key.second, "ood", summarize(ood, success_threshold)});
  }
  return out;
}

Heatmap heatmap_table(std::span<const SeedMetrics> metrics, std::vector<int> go_axis, std::vector<int> shared_axis) {
  std::map<std::pair<int, int>, std::vector<double>> cells;
  for (const auto& m : metrics) {
    if (!m.go_size || !m.shared_symbols) continue;
    cells[{*m.go_size, *m.shared_symbols}].push_back(m.ood);
  }
  if (go_axis.empty() || shared_axis.empty()) {
    std::set<int> rows, cols;
    for (const auto& entry : cells) {
      rows.insert(entry.first.first);
      cols.insert(entry.first.second);
    }
    if (go_axis.empty()) go_axis.assign(rows.begin(), rows.end());
    if (shared_axis.empty()) shared_axis.assign(cols.begin(), cols.end());
  }
  std::sort(go_axis.begin(), go_axis.end());
  std::sort(shared_axis.begin(), shared_axis.end());

  Heatmap h;
  h.go_sizes = go_axis;
  h.shared_symbols = shared_axis;
  const auto nr = static_cast<Eigen::Index>(go_axis.size());
  const auto nc = static_cast<Eigen::Index>(shared_axis.size());
  h.mean_ood = Eigen::MatrixXd::Constant(nr, nc, std::numeric_limits<double>::quiet_NaN());
  h.seeds = Eigen::MatrixXi::Zero(nr, nc);
  for (Eigen::Index r = 0; r < nr; ++r) {
    for (Eigen::Index c = 0; c < nc; ++c) {
      const auto it = cells.find({go_axis[r], shared_axis[c]});
      if (it == cells.end()) {
        h.missing.emplace_back(go_axis[r], shared_axis[c]);
        continue;
      }
      h.seeds(r, c) = static_cast<int>(it->second.size());
      h.mean_ood(r, c) = summarize(it->second).mean;
    }
  }
  return h;
}

}  // namespace ctlpp
