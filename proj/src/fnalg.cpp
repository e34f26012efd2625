#include "ctlpp/fnalg.hpp"

#include <cassert>
#include <numeric>
#include <string>

#include "ctlpp/errors.hpp"

namespace ctlpp {

std::string_view to_string(Group g) {
  switch (g) {
    case Group::Ga: return "Ga";
    case Group::Gb: return "Gb";
    case Group::Ga1: return "Ga1";
    case Group::Ga2: return "Ga2";
    case Group::Gb1: return "Gb1";
    case Group::Gb2: return "Gb2";
    case Group::Go: return "Go";
  }
  return "?";
}

Group parse_group(std::string_view text) {
  for (Group g : {Group::Ga, Group::Gb, Group::Ga1, Group::Ga2, Group::Gb1, Group::Gb2, Group::Go})
    if (to_string(g) == text) return g;
  throw ParseError("unknown group '" + std::string(text) + "'");
}

std::vector<Group> groups_of(Variant v) {
  if (v == Variant::S) return {Group::Ga1, Group::Ga2, Group::Gb1, Group::Gb2, Group::Go};
  return {Group::Ga, Group::Gb};
}

std::vector<int> group_sizes(const TaskConfig& config) {
  validate(config);
  if (config.variant != Variant::S) return {config.num_functions / 2, config.num_functions / 2};
  const int rest = config.num_functions - config.go_size;
  std::vector<int> sizes(4, rest / 4);
  for (int i = 0; i < rest % 4; ++i) ++sizes[i];
  sizes.push_back(config.go_size);
  return sizes;
}

bool is_permutation(std::span<const SymbolId> mapping) {
  std::vector<bool> seen(mapping.size(), false);
  for (SymbolId s : mapping) {
    if (s < 0 || static_cast<std::size_t>(s) >= mapping.size() || seen[s]) return false;
    seen[s] = true;
  }
  return true;
}

std::vector<FunctionTable> build_functions(const TaskConfig& config, RandomStream& rng) {
  const auto sizes = group_sizes(config);
  const auto groups = groups_of(config.variant);

  std::vector<FunctionTable> tables;
  tables.reserve(config.num_functions);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (int k = 0; k < sizes[gi]; ++k) {
      FunctionTable f;
      f.id = static_cast<FunctionId>(tables.size());
      f.group = groups[gi];
      f.mapping.resize(config.num_symbols);
      std::iota(f.mapping.begin(), f.mapping.end(), 0);
      rng.shuffle(std::span(f.mapping));
      tables.push_back(std::move(f));
    }
  }
  return tables;
}

SymbolId apply(const FunctionTable& f, SymbolId s) {
  assert(s >= 0 && s < f.num_symbols());
  return f.mapping[s];
}

SymbolId apply_inverse(const FunctionTable& f, SymbolId s_out) {
  for (SymbolId s = 0; s < f.num_symbols(); ++s)
    if (f.mapping[s] == s_out) return s;
  assert(false && "symbol outside the function's alphabet");
  return -1;
}

SymbolId evaluate(const Expression& expr, std::span<const FunctionTable> tables) {
  SymbolId s = expr.input;
  for (FunctionId id : expr.functions) s = apply(tables[id], s);
  return s;
}

std::vector<FunctionId> members(std::span<const FunctionTable> tables, Group g) {
  std::vector<FunctionId> ids;
  for (const auto& f : tables)
    if (f.group == g) ids.push_back(f.id);
  return ids;
}

}  // namespace ctlpp
