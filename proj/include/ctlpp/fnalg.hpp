#pragma once

#include <compare>
#include <span>
#include <string_view>
#include <vector>

#include "ctlpp/config.hpp"
#include "ctlpp/random.hpp"

namespace ctlpp {

using SymbolId = int;
using FunctionId = int;

/// Function groups. A and R use {Ga, Gb}; S uses {Ga1, Ga2, Gb1, Gb2, Go}.
enum class Group { Ga, Gb, Ga1, Ga2, Gb1, Gb2, Go };

std::string_view to_string(Group g);
Group parse_group(std::string_view text);

/// Groups of a variant in declared order (the order id blocks are assigned in).
std::vector<Group> groups_of(Variant v);

/// Number of functions per group, parallel to groups_of(config.variant).
/// A/R split evenly. S gives Go go_size functions and spreads the rest over the
/// four path groups, the first (rest % 4) path groups receiving one extra.
std::vector<int> group_sizes(const TaskConfig& config);

/// A bijection over [0, num_symbols): mapping[s] = f(s).
struct FunctionTable {
  FunctionId id = 0;
  std::vector<SymbolId> mapping;
  Group group = Group::Ga;

  int num_symbols() const { return static_cast<int>(mapping.size()); }
  bool operator==(const FunctionTable&) const = default;
};

/// True when mapping holds every value of [0, size) exactly once.
bool is_permutation(std::span<const SymbolId> mapping);

/// An input symbol and the functions applied to it; functions[0] is applied first.
struct Expression {
  SymbolId input = 0;
  std::vector<FunctionId> functions;

  auto operator<=>(const Expression&) const = default;
};

/// num_functions uniform random permutations (Fisher-Yates), groups assigned in
/// contiguous id blocks. Throws ConfigError when the functions cannot be
/// partitioned into the variant's groups.
std::vector<FunctionTable> build_functions(const TaskConfig& config, RandomStream& rng);

SymbolId apply(const FunctionTable& f, SymbolId s);
SymbolId apply_inverse(const FunctionTable& f, SymbolId s_out);

/// Output symbol of expr; the label oracle for every dataset.
SymbolId evaluate(const Expression& expr, std::span<const FunctionTable> tables);

/// Ids of the functions in group g, ascending.
std::vector<FunctionId> members(std::span<const FunctionTable> tables, Group g);

}  // namespace ctlpp
