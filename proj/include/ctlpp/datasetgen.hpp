#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlpp/config.hpp"
#include "ctlpp/fnalg.hpp"
#include "ctlpp/sampler.hpp"

namespace ctlpp {

inline constexpr std::string_view kFormatVersion = "ctlpp-v1";

/// Everything derived from a TaskConfig before any example is drawn.
/// Function tables come from the child stream derive_seed(seed, 1) and the
/// overlap sets from derive_seed(seed, 2).
struct Task {
  TaskConfig config;
  std::vector<FunctionTable> tables;
  std::optional<OverlapSpec> overlap;  // variant S only
  SamplingGraph graph;

  const OverlapSpec* overlap_ptr() const { return overlap ? &*overlap : nullptr; }
};

Task make_task(const TaskConfig& config);

/// Child stream index of one (split, length) generation shard. Shard 0 of a
/// split seeds the final shuffle.
std::uint64_t shard_index(Split split, int length);

struct Example {
  Expression expression;
  std::vector<std::string> tokens;
  SymbolId target = 0;
  Split split = Split::Train;

  int length() const { return static_cast<int>(expression.functions.size()); }
  bool operator==(const Example&) const = default;
};

std::string function_token(FunctionId id);
std::string symbol_token(SymbolId s);

/// Right-to-left rendering: the last applied function first, the input symbol last.
std::vector<std::string> render_tokens(const Expression& expr);

/// Inverse of render_tokens over the vocabulary f0..f{num_functions-1},
/// 0..{num_symbols-1}. Throws ParseError on an unknown token, a symbol token
/// anywhere but the final position, or an empty function list.
Expression parse_tokens(std::span<const std::string> tokens, int num_functions, int num_symbols);

struct DatasetManifest {
  std::string format{kFormatVersion};
  TaskConfig config;
  Split split = Split::Train;
  std::vector<FunctionTable> functions;
  std::optional<OverlapSpec> overlap;
  bool coverage_incomplete = false;
  long requested_size = 0;
  long size = 0;
  std::map<int, long> quotas;            // planned examples per length
  std::map<int, long> counts;            // examples per length in the file
  std::map<int, std::uint64_t> space;    // distinct expressions per length
  std::vector<std::string> warnings;
  std::string content_hash;              // FNV-1a of the example lines

  nlohmann::ordered_json to_json() const;
  /// Throws ParseError when the object is malformed or its tables are inconsistent.
  static DatasetManifest from_json(const nlohmann::json& j);
  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Example> examples;
};

struct LengthPlan {
  std::map<int, long> quotas;
  long shortfall = 0;  // examples that could not be placed anywhere
};

/// Equal share per length (remainder to the longest lengths), capped by the
/// number of distinct expressions per length; capped-off examples move to the
/// longest lengths that still have room. Lengths listed in `forced` receive
/// their whole space regardless of the share, taking the difference from the
/// longest lengths.
LengthPlan plan_lengths(long size, const std::map<int, std::uint64_t>& space,
                        std::span<const int> forced = {});

/// Generates one split. Lengths are generated in parallel on up to `jobs`
/// threads; each length draws from its own child stream, so the output does
/// not depend on `jobs`.
Dataset generate_split(const Task& task, Split split, int jobs = 1);
Dataset generate_split(const TaskConfig& config, Split split, int jobs = 1);

Example make_example(const Expression& expr, std::span<const FunctionTable> tables, Split split);

}  // namespace ctlpp
