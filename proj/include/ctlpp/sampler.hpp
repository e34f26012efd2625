#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctlpp/config.hpp"
#include "ctlpp/fnalg.hpp"
#include "ctlpp/random.hpp"

namespace ctlpp {

// ---------------------------------------------------------------------------
// Sampling graphs

/// Edge colors of a sampling graph: black edges are used for both training and
/// testing, blue ones only for training, red ones only for testing.
enum class EdgeMode { TrainAndTest, TrainOnly, TestOnly };

std::string_view to_string(EdgeMode m);

inline bool train_usable(EdgeMode m) { return m != EdgeMode::TestOnly; }
inline bool test_usable(EdgeMode m) { return m != EdgeMode::TrainOnly; }

/// Directed graph over function groups plus the IN and OUT terminals. An
/// OUT -> IN edge (variant S) means an expression may continue with a new
/// chained pair after a completed one.
struct SamplingGraph {
  struct Edge {
    std::string from;
    std::string to;
    EdgeMode mode;
    bool operator==(const Edge&) const = default;
  };

  Variant variant = Variant::A;
  std::vector<std::string> nodes;
  std::vector<Edge> edges;

  std::optional<EdgeMode> mode(std::string_view from, std::string_view to) const;
  nlohmann::ordered_json to_json() const;
  std::string to_dot() const;
};

inline constexpr std::string_view kInNode = "IN";
inline constexpr std::string_view kOutNode = "OUT";

SamplingGraph build_graph(Variant variant);

// ---------------------------------------------------------------------------
// Variant S overlap sets

enum class Path { A, B };

/// Path of a variant-S stage-1 or stage-2 group; nullopt for Go and A/R groups.
std::optional<Path> path_of(Group g);
bool is_stage1(Group g);

/// Symbol sets of one overlap function f: f may follow a path-a stage-1
/// function only when the intermediate symbol lies in path_a (likewise b).
struct OverlapSets {
  FunctionId function = 0;
  std::vector<SymbolId> path_a;  // sorted
  std::vector<SymbolId> path_b;  // sorted

  const std::vector<SymbolId>& of(Path p) const { return p == Path::A ? path_a : path_b; }
  std::vector<SymbolId> shared() const;
  bool operator==(const OverlapSets&) const = default;
};

struct OverlapSpec {
  int go_size = 0;
  int shared_symbols = 0;
  std::vector<OverlapSets> sets;  // one per Go function, ascending id
  bool coverage_incomplete = true;

  const OverlapSets* find(FunctionId f) const;
  /// True when overlap function f may consume symbol s coming from path p.
  bool admits(FunctionId f, Path p, SymbolId s) const;

  nlohmann::ordered_json to_json() const;
  static OverlapSpec from_json(const nlohmann::json& j);
  bool operator==(const OverlapSpec&) const = default;
};

/// Draws S_a/S_b for every Go function. Each pair shares exactly
/// shared_symbols symbols, the remaining symbols are split evenly between the
/// a-only and b-only parts. When go_size * shared_symbols >= num_symbols the
/// shared parts are laid out round-robin over a shuffled alphabet so that
/// their union is the full alphabet; otherwise coverage_incomplete is set.
OverlapSpec build_overlap_spec(const TaskConfig& config, std::span<const FunctionTable> tables,
                               RandomStream& rng);

// ---------------------------------------------------------------------------
// Samplers

/// Variants A and R. Train/IID: A alternates groups starting from a uniform
/// group, R keeps one uniform group. OOD: the opposite rule, length >= 2.
Expression sample_expression_ar(Variant variant, Split split, int length,
                                std::span<const FunctionTable> tables, RandomStream& rng);

inline constexpr int kStage2Retries = 100;

/// Variant S: num_pairs chained (stage-1, stage-2) pairs with the path drawn
/// per pair. Stage-2 candidates are G_p2 plus the eligible Go functions for
/// train/IID, and the other path's stage-2 group for OOD.
Expression sample_expression_s(Split split, int num_pairs, std::span<const FunctionTable> tables,
                               const OverlapSpec& overlap, RandomStream& rng,
                               std::optional<Path> force_path = std::nullopt);

// ---------------------------------------------------------------------------
// Legality

/// Walks the expression's group sequence over train-usable edges (chaining
/// through OUT -> IN where the graph has it) and checks S_a/S_b eligibility
/// at every Go use. overlap may be null for A/R.
bool is_train_legal(const Expression& expr, const SamplingGraph& graph,
                    std::span<const FunctionTable> tables, const OverlapSpec* overlap);

/// Same walk restricted to test-usable edges.
bool is_test_walk(const Expression& expr, const SamplingGraph& graph,
                  std::span<const FunctionTable> tables);

/// An OOD pattern: a test walk that is not train-legal.
bool is_ood_pattern(const Expression& expr, const SamplingGraph& graph,
                    std::span<const FunctionTable> tables, const OverlapSpec* overlap);

// ---------------------------------------------------------------------------
// The space of expressions a split draws from

/// Function-count lengths a split draws: 1..max for A/R train/IID, 2..max for
/// A/R OOD, even counts 2..max for S.
std::vector<int> split_lengths(const TaskConfig& config, Split split);

/// Functions that may come next given the previous function's group (nullopt
/// at the start) and the current intermediate symbol. Together with
/// split_lengths this defines the support of every sampler.
std::vector<FunctionId> next_candidates(Variant variant, Split split, std::optional<Group> last,
                                        SymbolId current, std::span<const FunctionTable> tables,
                                        const OverlapSpec* overlap);

/// Number of distinct expressions of the given length in a split's support,
/// saturating at UINT64_MAX.
std::uint64_t count_expressions(Variant variant, Split split, int length,
                                std::span<const FunctionTable> tables, const OverlapSpec* overlap);

/// Visits every expression of the given length in a split's support in
/// lexicographic (input, functions) order.
void for_each_expression(Variant variant, Split split, int length,
                         std::span<const FunctionTable> tables, const OverlapSpec* overlap,
                         const std::function<void(const Expression&)>& visit);

}  // namespace ctlpp
