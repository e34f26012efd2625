#include "ctlpp/sampler.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "ctlpp/errors.hpp"

namespace ctlpp {

std::string_view to_string(EdgeMode m) {
  switch (m) {
    case EdgeMode::TrainAndTest: return "train_and_test";
    case EdgeMode::TrainOnly: return "train_only";
    case EdgeMode::TestOnly: return "test_only";
  }
  return "?";
}

std::optional<EdgeMode> SamplingGraph::mode(std::string_view from, std::string_view to) const {
  for (const auto& e : edges)
    if (e.from == from && e.to == to) return e.mode;
  return std::nullopt;
}

nlohmann::ordered_json SamplingGraph::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = std::string(ctlpp::to_string(variant));
  j["nodes"] = nodes;
  auto& out = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : edges)
    out.push_back({{"from", e.from}, {"to", e.to}, {"mode", std::string(ctlpp::to_string(e.mode))}});
  return j;
}

std::string SamplingGraph::to_dot() const {
  std::ostringstream os;
  os << "digraph variant_" << ctlpp::to_string(variant) << " {\n";
  for (const auto& n : nodes) {
    const bool terminal = n == kInNode || n == kOutNode;
    os << "  " << n << " [shape=" << (terminal ? "box" : "circle") << "];\n";
  }
  for (const auto& e : edges) {
    const char* color = e.mode == EdgeMode::TrainAndTest ? "black"
                        : e.mode == EdgeMode::TrainOnly  ? "blue"
                                                         : "red";
    os << "  " << e.from << " -> " << e.to << " [color=" << color << "];\n";
  }
  os << "}\n";
  return os.str();
}

SamplingGraph build_graph(Variant variant) {
  SamplingGraph g;
  g.variant = variant;
  const std::string in(kInNode), out(kOutNode);
  auto add = [&](std::string_view from, std::string_view to, EdgeMode mode) {
    g.edges.push_back({std::string(from), std::string(to), mode});
  };
  if (variant == Variant::S) {
    g.nodes = {in, "Ga1", "Gb1", "Ga2", "Go", "Gb2", out};
    add(in, "Ga1", EdgeMode::TrainAndTest);
    add(in, "Gb1", EdgeMode::TrainAndTest);
    add("Ga1", "Ga2", EdgeMode::TrainOnly);
    add("Gb1", "Gb2", EdgeMode::TrainOnly);
    add("Ga1", "Go", EdgeMode::TrainOnly);
    add("Gb1", "Go", EdgeMode::TrainOnly);
    add("Ga1", "Gb2", EdgeMode::TestOnly);
    add("Gb1", "Ga2", EdgeMode::TestOnly);
    add("Ga2", out, EdgeMode::TrainAndTest);
    add("Gb2", out, EdgeMode::TrainAndTest);
    add("Go", out, EdgeMode::TrainAndTest);
    add(out, in, EdgeMode::TrainAndTest);
    return g;
  }
  // A and R share the topology; R swaps the colors of the group-to-group edges.
  const EdgeMode cross = variant == Variant::A ? EdgeMode::TrainOnly : EdgeMode::TestOnly;
  const EdgeMode self = variant == Variant::A ? EdgeMode::TestOnly : EdgeMode::TrainOnly;
  g.nodes = {in, "Ga", "Gb", out};
  add(in, "Ga", EdgeMode::TrainAndTest);
  add(in, "Gb", EdgeMode::TrainAndTest);
  add("Ga", "Gb", cross);
  add("Gb", "Ga", cross);
  add("Ga", "Ga", self);
  add("Gb", "Gb", self);
  add("Ga", out, EdgeMode::TrainAndTest);
  add("Gb", out, EdgeMode::TrainAndTest);
  return g;
}

// ---------------------------------------------------------------------------

std::optional<Path> path_of(Group g) {
  switch (g) {
    case Group::Ga1:
    case Group::Ga2: return Path::A;
    case Group::Gb1:
    case Group::Gb2: return Path::B;
    default: return std::nullopt;
  }
}

bool is_stage1(Group g) { return g == Group::Ga1 || g == Group::Gb1; }

namespace {

Group stage1_group(Path p) { return p == Path::A ? Group::Ga1 : Group::Gb1; }
Group stage2_group(Path p) { return p == Path::A ? Group::Ga2 : Group::Gb2; }
Path other(Path p) { return p == Path::A ? Path::B : Path::A; }

bool contains(const std::vector<SymbolId>& sorted, SymbolId s) {
  return std::binary_search(sorted.begin(), sorted.end(), s);
}

}  // namespace

std::vector<SymbolId> OverlapSets::shared() const {
  std::vector<SymbolId> out;
  std::set_intersection(path_a.begin(), path_a.end(), path_b.begin(), path_b.end(),
                        std::back_inserter(out));
  return out;
}

const OverlapSets* OverlapSpec::find(FunctionId f) const {
  for (const auto& s : sets)
    if (s.function == f) return &s;
  return nullptr;
}

bool OverlapSpec::admits(FunctionId f, Path p, SymbolId s) const {
  const OverlapSets* sets_f = find(f);
  return sets_f != nullptr && contains(sets_f->of(p), s);
}

nlohmann::ordered_json OverlapSpec::to_json() const {
  nlohmann::ordered_json j;
  j["go_size"] = go_size;
  j["shared_symbols"] = shared_symbols;
  auto& arr = j["sets"] = nlohmann::ordered_json::array();
  for (const auto& s : sets) arr.push_back({{"function", s.function}, {"a", s.path_a}, {"b", s.path_b}});
  j["coverage_incomplete"] = coverage_incomplete;
  return j;
}

OverlapSpec OverlapSpec::from_json(const nlohmann::json& j) {
  OverlapSpec spec;
  try {
    spec.go_size = j.at("go_size").get<int>();
    spec.shared_symbols = j.at("shared_symbols").get<int>();
    spec.coverage_incomplete = j.at("coverage_incomplete").get<bool>();
    for (const auto& s : j.at("sets")) {
      OverlapSets sets;
      sets.function = s.at("function").get<FunctionId>();
      sets.path_a = s.at("a").get<std::vector<SymbolId>>();
      sets.path_b = s.at("b").get<std::vector<SymbolId>>();
      std::sort(sets.path_a.begin(), sets.path_a.end());
      std::sort(sets.path_b.begin(), sets.path_b.end());
      spec.sets.push_back(std::move(sets));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad overlap object: ") + e.what());
  }
  return spec;
}

OverlapSpec build_overlap_spec(const TaskConfig& config, std::span<const FunctionTable> tables,
                               RandomStream& rng) {
  validate(config);
  if (config.variant != Variant::S) throw ConfigError("overlap sets exist only for variant S");
  const int n = config.num_symbols;
  const int x = config.shared_symbols;

  OverlapSpec spec;
  spec.go_size = config.go_size;
  spec.shared_symbols = x;
  spec.coverage_incomplete = static_cast<long>(config.go_size) * x < n;

  std::vector<SymbolId> alphabet(n);
  std::iota(alphabet.begin(), alphabet.end(), 0);
  std::vector<SymbolId> layout = alphabet;
  if (!spec.coverage_incomplete) rng.shuffle(std::span(layout));

  const auto go = members(tables, Group::Go);
  for (std::size_t i = 0; i < go.size(); ++i) {
    std::vector<bool> in_shared(n, false);
    if (!spec.coverage_incomplete) {
      // Consecutive windows of the shuffled alphabet; go_size * x >= n windows
      // of width x wrap around the whole alphabet at least once.
      for (int j = 0; j < x; ++j) in_shared[layout[(i * x + j) % n]] = true;
    } else {
      std::vector<SymbolId> pick = alphabet;
      rng.shuffle(std::span(pick));
      for (int j = 0; j < x; ++j) in_shared[pick[j]] = true;
    }
    std::vector<SymbolId> rest;
    for (SymbolId s = 0; s < n; ++s)
      if (!in_shared[s]) rest.push_back(s);
    rng.shuffle(std::span(rest));

    OverlapSets sets;
    sets.function = go[i];
    const std::size_t half = rest.size() / 2;
    for (SymbolId s = 0; s < n; ++s) {
      if (in_shared[s]) {
        sets.path_a.push_back(s);
        sets.path_b.push_back(s);
      }
    }
    sets.path_a.insert(sets.path_a.end(), rest.begin(), rest.begin() + half);
    sets.path_b.insert(sets.path_b.end(), rest.begin() + half, rest.end());
    std::sort(sets.path_a.begin(), sets.path_a.end());
    std::sort(sets.path_b.begin(), sets.path_b.end());
    spec.sets.push_back(std::move(sets));
  }
  return spec;
}

// ---------------------------------------------------------------------------

namespace {

FunctionId pick(const std::vector<FunctionId>& ids, RandomStream& rng) {
  return ids[rng.uniform_index(ids.size())];
}

}  // namespace

Expression sample_expression_ar(Variant variant, Split split, int length,
                                std::span<const FunctionTable> tables, RandomStream& rng) {
  if (variant == Variant::S) throw ConfigError("sample_expression_ar handles variants A and R only");
  if (length < 1) throw ConfigError("expression length must be at least 1");
  if (split == Split::Ood && length < 2)
    throw ConfigError("OOD expressions need at least two functions to contain a test-only pattern");

  const std::vector<FunctionId> groups[2] = {members(tables, Group::Ga), members(tables, Group::Gb)};
  const int num_symbols = tables.front().num_symbols();

  // A trains on alternation and tests on repetition; R is the complement.
  const bool alternate = (variant == Variant::A) == (split != Split::Ood);

  Expression expr;
  expr.input = rng.uniform_index(num_symbols);
  int group = rng.uniform_index(2);
  for (int i = 0; i < length; ++i) {
    expr.functions.push_back(pick(groups[group], rng));
    if (alternate) group = 1 - group;
  }
  return expr;
}

Expression sample_expression_s(Split split, int num_pairs, std::span<const FunctionTable> tables,
                               const OverlapSpec& overlap, RandomStream& rng,
                               std::optional<Path> force_path) {
  if (num_pairs < 1) throw ConfigError("num_pairs must be at least 1");
  const auto go = members(tables, Group::Go);
  const int num_symbols = tables.front().num_symbols();

  Expression expr;
  expr.input = rng.uniform_index(num_symbols);
  SymbolId current = expr.input;
  for (int k = 0; k < num_pairs; ++k) {
    const Path path = force_path ? *force_path : (rng.uniform_index(2) == 0 ? Path::A : Path::B);
    const auto stage1 = members(tables, stage1_group(path));
    if (stage1.empty()) throw SamplingError("stage-1 group of the drawn path is empty");

    bool placed = false;
    for (int attempt = 0; attempt < kStage2Retries && !placed; ++attempt) {
      const FunctionId first = pick(stage1, rng);
      const SymbolId mid = apply(tables[first], current);
      std::vector<FunctionId> candidates;
      if (split == Split::Ood) {
        candidates = members(tables, stage2_group(other(path)));
      } else {
        candidates = members(tables, stage2_group(path));
        for (FunctionId f : go)
          if (overlap.admits(f, path, mid)) candidates.push_back(f);
      }
      if (candidates.empty()) continue;
      const FunctionId second = pick(candidates, rng);
      expr.functions.push_back(first);
      expr.functions.push_back(second);
      current = apply(tables[second], mid);
      placed = true;
    }
    if (!placed)
      throw SamplingError("no stage-2 candidate after " + std::to_string(kStage2Retries) +
                          " stage-1 draws on path " + (path == Path::A ? "a" : "b") +
                          "; the configuration is degenerate");
  }
  return expr;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Usable>
bool walk(const Expression& expr, const SamplingGraph& graph, std::span<const FunctionTable> tables,
          Usable usable) {
  auto ok = [&](std::string_view from, std::string_view to) {
    const auto m = graph.mode(from, to);
    return m && usable(*m);
  };
  if (expr.functions.empty()) return false;
  std::string prev(kInNode);
  for (FunctionId id : expr.functions) {
    if (id < 0 || static_cast<std::size_t>(id) >= tables.size()) return false;
    const std::string next(to_string(tables[id].group));
    const bool direct = ok(prev, next);
    const bool chained = prev != kInNode && ok(prev, kOutNode) && ok(kOutNode, kInNode) && ok(kInNode, next);
    if (!direct && !chained) return false;
    prev = next;
  }
  return ok(prev, kOutNode);
}

}  // namespace

bool is_train_legal(const Expression& expr, const SamplingGraph& graph,
                    std::span<const FunctionTable> tables, const OverlapSpec* overlap) {
  if (!walk(expr, graph, tables, [](EdgeMode m) { return train_usable(m); })) return false;
  SymbolId current = expr.input;
  for (std::size_t i = 0; i < expr.functions.size(); ++i) {
    const FunctionTable& f = tables[expr.functions[i]];
    if (f.group == Group::Go) {
      if (i == 0 || overlap == nullptr) return false;
      const auto path = path_of(tables[expr.functions[i - 1]].group);
      if (!path || !overlap->admits(f.id, *path, current)) return false;
    }
    current = apply(f, current);
  }
  return true;
}

bool is_test_walk(const Expression& expr, const SamplingGraph& graph,
                  std::span<const FunctionTable> tables) {
  return walk(expr, graph, tables, [](EdgeMode m) { return test_usable(m); });
}

bool is_ood_pattern(const Expression& expr, const SamplingGraph& graph,
                    std::span<const FunctionTable> tables, const OverlapSpec* overlap) {
  return is_test_walk(expr, graph, tables) && !is_train_legal(expr, graph, tables, overlap);
}

// ---------------------------------------------------------------------------

std::vector<int> split_lengths(const TaskConfig& config, Split split) {
  std::vector<int> lengths;
  if (config.variant == Variant::S) {
    for (int len = 2; len <= config.max_functions; len += 2) lengths.push_back(len);
  } else {
    for (int len = split == Split::Ood ? 2 : 1; len <= config.max_functions; ++len) lengths.push_back(len);
  }
  return lengths;
}

std::vector<FunctionId> next_candidates(Variant variant, Split split, std::optional<Group> last,
                                        SymbolId current, std::span<const FunctionTable> tables,
                                        const OverlapSpec* overlap) {
  std::vector<FunctionId> out;
  auto add_group = [&](Group g) {
    for (const auto& f : tables)
      if (f.group == g) out.push_back(f.id);
  };

  if (variant != Variant::S) {
    if (!last) {
      add_group(Group::Ga);
      add_group(Group::Gb);
    } else {
      const bool alternate = (variant == Variant::A) == (split != Split::Ood);
      const Group other_group = *last == Group::Ga ? Group::Gb : Group::Ga;
      add_group(alternate ? other_group : *last);
    }
  } else if (!last || !is_stage1(*last)) {
    add_group(Group::Ga1);
    add_group(Group::Gb1);
  } else {
    const Path p = *path_of(*last);
    if (split == Split::Ood) {
      add_group(stage2_group(other(p)));
    } else {
      add_group(stage2_group(p));
      if (overlap != nullptr)
        for (const auto& f : tables)
          if (f.group == Group::Go && overlap->admits(f.id, p, current)) out.push_back(f.id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

bool length_in_support(Variant variant, Split split, int length) {
  if (length < 1) return false;
  if (variant == Variant::S) return length % 2 == 0;
  return split != Split::Ood || length >= 2;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t r = a + b;
  return r < a ? std::numeric_limits<std::uint64_t>::max() : r;
}

}  // namespace

std::uint64_t count_expressions(Variant variant, Split split, int length,
                                std::span<const FunctionTable> tables, const OverlapSpec* overlap) {
  if (!length_in_support(variant, split, length) || tables.empty()) return 0;
  const int n = tables.front().num_symbols();

  // State: (group of the last function, current symbol). Candidates depend on nothing else.
  using State = std::pair<std::optional<Group>, SymbolId>;
  std::map<State, std::uint64_t> frontier;
  for (SymbolId s = 0; s < n; ++s) frontier[{std::nullopt, s}] = 1;
  for (int step = 0; step < length; ++step) {
    std::map<State, std::uint64_t> next;
    for (const auto& [state, count] : frontier) {
      for (FunctionId f : next_candidates(variant, split, state.first, state.second, tables, overlap)) {
        auto& slot = next[{tables[f].group, apply(tables[f], state.second)}];
        slot = sat_add(slot, count);
      }
    }
    frontier = std::move(next);
  }
  std::uint64_t total = 0;
  for (const auto& entry : frontier) total = sat_add(total, entry.second);
  return total;
}

void for_each_expression(Variant variant, Split split, int length,
                         std::span<const FunctionTable> tables, const OverlapSpec* overlap,
                         const std::function<void(const Expression&)>& visit) {
  if (!length_in_support(variant, split, length) || tables.empty()) return;
  const int n = tables.front().num_symbols();
  Expression expr;
  std::function<void(std::optional<Group>, SymbolId)> extend = [&](std::optional<Group> last,
                                                                   SymbolId current) {
    if (static_cast<int>(expr.functions.size()) == length) {
      visit(expr);
      return;
    }
    for (FunctionId f : next_candidates(variant, split, last, current, tables, overlap)) {
      expr.functions.push_back(f);
      extend(tables[f].group, apply(tables[f], current));
      expr.functions.pop_back();
    }
  };
  for (SymbolId s = 0; s < n; ++s) {
    expr.input = s;
    extend(std::nullopt, s);
  }
}

}  // namespace ctlpp
