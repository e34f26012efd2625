#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctlpp/config.hpp"
#include "ctlpp/fnalg.hpp"

namespace ctlpp {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Dumps produced by a trained model

struct DumpMeta {
  std::string model;
  std::string variant;
  std::uint64_t seed = 0;
  int dim = 0;
  nlohmann::json extra = nlohmann::json::object();  // any further meta keys, kept verbatim
};

/// Pre-classifier vectors, one per (function, output symbol).
template <typename Scalar = double>
struct RepresentationDump {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  DumpMeta meta;
  int num_functions = 0;
  int num_symbols = 0;
  std::vector<Vector> entries;  // index function * num_symbols + symbol

  const Vector& at(FunctionId f, SymbolId s) const { return entries[f * num_symbols + s]; }
  Vector& at(FunctionId f, SymbolId s) { return entries[f * num_symbols + s]; }

  /// Row f holds the representation of `symbol` produced by function f.
  DenseMatrix<Scalar> rows_for_symbol(SymbolId symbol) const {
    DenseMatrix<Scalar> rows(num_functions, meta.dim);
    for (FunctionId f = 0; f < num_functions; ++f) rows.row(f) = at(f, symbol).transpose();
    return rows;
  }
};

struct PredictionRecord {
  FunctionId f1 = 0;  // applied first
  FunctionId f2 = 0;
  SymbolId input = 0;
  SymbolId pred = 0;
};

struct PredictionDump {
  DumpMeta meta;
  std::vector<PredictionRecord> records;
};

struct SeedMetrics {
  std::uint64_t seed = 0;
  std::string model;  // optional in files; groups rows of the aggregate table
  Variant variant = Variant::A;
  double iid = 0;
  double ood = 0;
  long steps = 0;
  bool converged = true;
  std::optional<int> go_size;
  std::optional<int> shared_symbols;
};

/// Reads a representation dump and checks it against the task's dimensions:
/// complete (function, symbol) grid, one dim for every vector, finite values.
RepresentationDump<double> read_representation_dump(const std::filesystem::path& path, int num_functions,
                                                    int num_symbols);
void write_representation_dump(const RepresentationDump<double>& dump, const std::filesystem::path& path);

/// Reads prediction records; an optional leading meta line is accepted.
PredictionDump read_prediction_dump(const std::filesystem::path& path, int num_functions, int num_symbols);
void write_prediction_dump(const PredictionDump& dump, const std::filesystem::path& path);

std::vector<SeedMetrics> read_seed_metrics(const std::filesystem::path& path);
SeedMetrics parse_seed_metrics(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SeedMetrics& m);

// ---------------------------------------------------------------------------
// Cosine similarity and clusters

/// Pairwise cosine similarity between the rows of `rows`, clamped to [-1, 1].
/// Rows with zero norm have similarity 0 with everything, including
/// themselves; their indices are appended to zero_rows when given.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> cosine_similarity(const Eigen::MatrixBase<Derived>& rows,
                                                        std::vector<int>* zero_rows = nullptr) {
  using Scalar = typename Derived::Scalar;
  DenseMatrix<Scalar> unit = rows;
  std::vector<bool> zero(rows.rows(), false);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Scalar norm = unit.row(i).norm();
    if (norm > Scalar(0)) {
      unit.row(i) /= norm;
    } else {
      unit.row(i).setZero();
      zero[i] = true;
      if (zero_rows) zero_rows->push_back(static_cast<int>(i));
    }
  }
  DenseMatrix<Scalar> sim = unit * unit.transpose();
  sim = sim.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
  for (Eigen::Index i = 0; i < sim.rows(); ++i) sim(i, i) = zero[i] ? Scalar(0) : Scalar(1);
  // Symmetrize away rounding differences between (i, j) and (j, i).
  return ((sim + sim.transpose()) / Scalar(2)).eval();
}

struct CosineResult {
  Eigen::MatrixXd matrix;
  std::vector<FunctionId> zero_norm;
  std::vector<std::string> warnings;
};

/// num_functions x num_functions similarity of `symbol`'s representations.
CosineResult cosine_matrix(const RepresentationDump<double>& dump, SymbolId symbol);

/// Connected components of the graph joining i and j when similarity(i, j) >=
/// threshold. Label 0 is the largest component; equal sizes are ordered by
/// their smallest member.
template <typename Derived>
std::vector<int> detect_clusters(const Eigen::MatrixBase<Derived>& similarity,
                                 typename Derived::Scalar threshold = 0.8) {
  const int n = static_cast<int>(similarity.rows());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (similarity(i, j) >= threshold) parent[find(i)] = find(j);

  std::map<int, std::vector<int>> components;
  for (int i = 0; i < n; ++i) components[find(i)].push_back(i);
  std::vector<std::vector<int>> ordered;
  for (auto& entry : components) ordered.push_back(std::move(entry.second));
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  });
  std::vector<int> labels(n, -1);
  for (std::size_t c = 0; c < ordered.size(); ++c)
    for (int i : ordered[c]) labels[i] = static_cast<int>(c);
  return labels;
}

inline int num_clusters(const std::vector<int>& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

// ---------------------------------------------------------------------------
// Compatibility grids

/// Assignment of function ids to named buckets; of[f] == -1 leaves f out.
struct Partition {
  std::vector<std::string> labels;
  std::vector<int> of;
};

Partition group_partition(std::span<const FunctionTable> tables);
/// Clusters from detect_clusters as buckets C1, C2, ...
Partition cluster_partition(const std::vector<int>& clusters);

struct CompatibilityGrid {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  Eigen::MatrixXd accuracy;  // NaN where undefined
  Eigen::MatrixXi pairs;     // qualifying (f1, f2) pairs per cell

  std::optional<double> cell(int r, int c) const {
    if (pairs(r, c) == 0) return std::nullopt;
    return accuracy(r, c);
  }
};

/// Two-step accuracy at a fixed intermediate symbol: cell (R, C) averages,
/// over f1 in row bucket R and f2 in column bucket C, whether the prediction
/// for input apply_inverse(f1, symbol) matches f2(symbol). Cells without
/// qualifying records are undefined rather than 0.
CompatibilityGrid compatibility_grid(const PredictionDump& predictions, std::span<const FunctionTable> tables,
                                     SymbolId symbol, const Partition& row_partition,
                                     const Partition& col_partition);

// ---------------------------------------------------------------------------
// Seed aggregation and heatmaps

struct SummaryStats {
  int count = 0;
  double mean = 0;
  double std = 0;  // population standard deviation
  double success_rate = 0;
};

/// Mean, population standard deviation and the fraction of values strictly
/// above success_threshold.
SummaryStats summarize(std::span<const double> values, double success_threshold = 0.95);

struct SeedAggregate {
  std::string model;
  Variant variant = Variant::A;
  std::string split;  // "iid" or "ood"
  SummaryStats stats;
};

/// One row per (model, variant, split) in order of first appearance of the
/// (model, variant) key, iid before ood.
std::vector<SeedAggregate> aggregate_seeds(std::span<const SeedMetrics> metrics, double success_threshold = 0.95,
                                           bool converged_only = false);

struct Heatmap {
  std::vector<int> go_sizes;        // rows, ascending
  std::vector<int> shared_symbols;  // columns, ascending
  Eigen::MatrixXd mean_ood;         // NaN for missing cells
  Eigen::MatrixXi seeds;
  std::vector<std::pair<int, int>> missing;  // (go_size, shared_symbols)
};

/// Mean OOD accuracy per (go_size, shared_symbols). Axes default to the
/// values present in the metrics; cells without a seed are listed in missing.
Heatmap heatmap_table(std::span<const SeedMetrics> metrics, std::vector<int> go_axis = {},
                      std::vector<int> shared_axis = {});

}  // namespace ctlpp
