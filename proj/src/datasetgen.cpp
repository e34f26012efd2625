#include "ctlpp/datasetgen.hpp"

#include <algorithm>
#include <charconv>
#include <future>
#include <set>

#include "ctlpp/errors.hpp"

namespace ctlpp {

namespace {

constexpr std::uint64_t kTablesShard = 1;
constexpr std::uint64_t kOverlapShard = 2;
// Dedup'd splits switch from rejection sampling to enumerate-and-subsample
// when the quota is at least half of a space this small.
constexpr std::uint64_t kEnumerateLimit = 4'000'000;

}  // namespace

Task make_task(const TaskConfig& config) {
  validate(config);
  Task task;
  task.config = config;
  RandomStream table_rng(derive_seed(config.seed, kTablesShard));
  task.tables = build_functions(config, table_rng);
  if (config.variant == Variant::S) {
    RandomStream overlap_rng(derive_seed(config.seed, kOverlapShard));
    task.overlap = build_overlap_spec(config, task.tables, overlap_rng);
  }
  task.graph = build_graph(config.variant);
  return task;
}

std::uint64_t shard_index(Split split, int length) {
  return 1000 + 100 * static_cast<std::uint64_t>(split) + static_cast<std::uint64_t>(length);
}

// ---------------------------------------------------------------------------

std::string function_token(FunctionId id) { return "f" + std::to_string(id); }
std::string symbol_token(SymbolId s) { return std::to_string(s); }

std::vector<std::string> render_tokens(const Expression& expr) {
  std::vector<std::string> tokens;
  tokens.reserve(expr.functions.size() + 1);
  for (auto it = expr.functions.rbegin(); it != expr.functions.rend(); ++it)
    tokens.push_back(function_token(*it));
  tokens.push_back(symbol_token(expr.input));
  return tokens;
}

namespace {

std::optional<int> parse_index(std::string_view digits) {
  if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) return std::nullopt;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

}  // namespace

Expression parse_tokens(std::span<const std::string> tokens, int num_functions, int num_symbols) {
  if (tokens.empty()) throw ParseError("empty token list");
  Expression expr;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    const bool last = i + 1 == tokens.size();
    if (!tok.empty() && tok[0] == 'f') {
      const auto id = parse_index(std::string_view(tok).substr(1));
      if (!id || *id >= num_functions) throw ParseError("unknown token '" + tok + "'");
      if (last) throw ParseError("expression must end with a symbol token");
      expr.functions.push_back(*id);
      continue;
    }
    const auto s = parse_index(tok);
    if (!s || *s >= num_symbols) throw ParseError("unknown token '" + tok + "'");
    if (!last) throw ParseError("symbol token '" + tok + "' is not in final position");
    expr.input = *s;
  }
  if (expr.functions.empty()) throw ParseError("expression has no functions");
  std::reverse(expr.functions.begin(), expr.functions.end());
  return expr;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = format;
  j["config"] = ctlpp::to_json(config);
  auto& fns = j["functions"] = nlohmann::ordered_json::array();
  for (const auto& f : functions)
    fns.push_back({{"id", f.id}, {"group", std::string(ctlpp::to_string(f.group))}, {"mapping", f.mapping}});
  j["overlap"] = overlap ? overlap->to_json() : nlohmann::ordered_json(nullptr);
  j["coverage_incomplete"] = coverage_incomplete;
  auto per_length = [](const auto& m) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (const auto& [len, v] : m) o[std::to_string(len)] = v;
    return o;
  };
  j["counts"] = per_length(counts);
  j["split"] = std::string(ctlpp::to_string(split));
  j["requested_size"] = requested_size;
  j["size"] = size;
  j["quotas"] = per_length(quotas);
  j["space"] = per_length(space);
  j["warnings"] = warnings;
  j["content_hash"] = content_hash;
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.format = j.at("format").get<std::string>();
    if (m.format != kFormatVersion)
      throw ParseError("unsupported format '" + m.format + "' (expected " + std::string(kFormatVersion) + ")");
    m.config = config_from_json(j.at("config"));
    for (const auto& f : j.at("functions")) {
      FunctionTable t;
      t.id = f.at("id").get<FunctionId>();
      t.group = parse_group(f.at("group").get<std::string>());
      t.mapping = f.at("mapping").get<std::vector<SymbolId>>();
      m.functions.push_back(std::move(t));
    }
    if (!j.at("overlap").is_null()) m.overlap = OverlapSpec::from_json(j.at("overlap"));
    m.coverage_incomplete = j.at("coverage_incomplete").get<bool>();
    m.split = parse_split(j.at("split").get<std::string>());
    m.requested_size = j.at("requested_size").get<long>();
    m.size = j.at("size").get<long>();
    auto per_length = [&](const char* key, auto& out) {
      for (const auto& [len, v] : j.at(key).items()) {
        const auto parsed = parse_index(len);
        if (!parsed) throw ParseError(std::string("bad length key in '") + key + "'");
        out[*parsed] = v.template get<typename std::decay_t<decltype(out)>::mapped_type>();
      }
    };
    per_length("counts", m.counts);
    per_length("quotas", m.quotas);
    per_length("space", m.space);
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    m.content_hash = j.at("content_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("bad manifest config: ") + e.what());
  }

  try {
    validate(m.config);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("manifest config is invalid: ") + e.what());
  }
  if (static_cast<int>(m.functions.size()) != m.config.num_functions)
    throw ParseError("manifest lists " + std::to_string(m.functions.size()) + " functions, config says " +
                     std::to_string(m.config.num_functions));
  const auto allowed = groups_of(m.config.variant);
  for (std::size_t i = 0; i < m.functions.size(); ++i) {
    const auto& f = m.functions[i];
    if (f.id != static_cast<FunctionId>(i)) throw ParseError("function ids must be 0..n-1 in order");
    if (f.num_symbols() != m.config.num_symbols || !is_permutation(f.mapping))
      throw ParseError("function f" + std::to_string(f.id) + " is not a permutation of the alphabet");
    if (std::find(allowed.begin(), allowed.end(), f.group) == allowed.end())
      throw ParseError("function f" + std::to_string(f.id) + " has group " + std::string(to_string(f.group)) +
                       " which variant " + std::string(to_string(m.config.variant)) + " does not use");
  }
  if ((m.config.variant == Variant::S) != m.overlap.has_value())
    throw ParseError("overlap object must be present exactly for variant S");
  return m;
}

// ---------------------------------------------------------------------------

LengthPlan plan_lengths(long size, const std::map<int, std::uint64_t>& space, std::span<const int> forced) {
  LengthPlan plan;
  if (space.empty()) {
    plan.shortfall = size;
    return plan;
  }
  std::vector<int> lengths;
  for (const auto& entry : space) lengths.push_back(entry.first);
  const long n = static_cast<long>(lengths.size());
  auto cap = [&](int len) {
    const std::uint64_t s = space.at(len);
    return s > static_cast<std::uint64_t>(size) ? size : static_cast<long>(s);
  };
  auto is_forced = [&](int len) { return std::find(forced.begin(), forced.end(), len) != forced.end(); };

  for (long i = 0; i < n; ++i) plan.quotas[lengths[i]] = size / n + (i >= n - size % n ? 1 : 0);

  long pool = 0;
  long debt = 0;
  for (int len : lengths) {
    long& q = plan.quotas[len];
    if (is_forced(len)) {
      const long need = static_cast<long>(space.at(len));
      if (need > q) debt += need - q;
      else pool += q - need;
      q = need;
    } else if (q > cap(len)) {
      pool += q - cap(len);
      q = cap(len);
    }
  }
  // Forced inclusions first consume the pool, then shrink the longest lengths.
  const long settled = std::min(pool, debt);
  pool -= settled;
  debt -= settled;
  for (auto it = lengths.rbegin(); it != lengths.rend() && debt > 0; ++it) {
    if (is_forced(*it)) continue;
    long& q = plan.quotas[*it];
    const long take = std::min(q, debt);
    q -= take;
    debt -= take;
  }
  if (debt > 0) throw ConfigError("split size is smaller than the examples that must be included");

  for (auto it = lengths.rbegin(); it != lengths.rend() && pool > 0; ++it) {
    if (is_forced(*it)) continue;
    long& q = plan.quotas[*it];
    const long take = std::min(cap(*it) - q, pool);
    q += take;
    pool -= take;
  }
  plan.shortfall = pool;
  return plan;
}

Example make_example(const Expression& expr, std::span<const FunctionTable> tables, Split split) {
  Example ex;
  ex.expression = expr;
  ex.tokens = render_tokens(expr);
  ex.target = evaluate(expr, tables);
  ex.split = split;
  return ex;
}

namespace {

Expression draw(const Task& task, Split split, int length, RandomStream& rng) {
  if (task.config.variant == Variant::S)
    return sample_expression_s(split, length / 2, task.tables, *task.overlap, rng);
  return sample_expression_ar(task.config.variant, split, length, task.tables, rng);
}

std::vector<Expression> generate_length(const Task& task, Split split, int length, long quota,
                                        std::uint64_t space) {
  std::vector<Expression> out;
  if (quota <= 0) return out;
  out.reserve(quota);
  const Variant v = task.config.variant;
  auto enumerate = [&] {
    std::vector<Expression> all;
    for_each_expression(v, split, length, task.tables, task.overlap_ptr(),
                        [&](const Expression& e) { all.push_back(e); });
    return all;
  };

  RandomStream rng(derive_seed(task.config.seed, shard_index(split, length)));
  if (static_cast<std::uint64_t>(quota) >= space) return enumerate();
  if (split == Split::Train) {
    for (long i = 0; i < quota; ++i) out.push_back(draw(task, split, length, rng));
    return out;
  }
  // Test splits are free of exact duplicates.
  if (space <= kEnumerateLimit && static_cast<std::uint64_t>(quota) * 2 >= space) {
    auto all = enumerate();
    for (long i = 0; i < quota; ++i) {
      const auto j = i + static_cast<long>(rng.uniform_below(all.size() - i));
      std::swap(all[i], all[j]);
    }
    all.resize(quota);
    return all;
  }
  std::set<Expression> seen;
  while (static_cast<long>(out.size()) < quota) {
    Expression e = draw(task, split, length, rng);
    if (seen.insert(e).second) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Dataset generate_split(const TaskConfig& config, Split split, int jobs) {
  return generate_split(make_task(config), split, jobs);
}

Dataset generate_split(const Task& task, Split split, int jobs) {
  const TaskConfig& config = task.config;
  const long size = config.split_size(split);

  Dataset ds;
  DatasetManifest& m = ds.manifest;
  m.config = config;
  m.split = split;
  m.functions = task.tables;
  m.overlap = task.overlap;
  m.coverage_incomplete = task.overlap ? task.overlap->coverage_incomplete : false;
  m.requested_size = size;

  for (int len : split_lengths(config, split))
    m.space[len] = count_expressions(config.variant, split, len, task.tables, task.overlap_ptr());

  std::vector<int> forced;
  if (config.variant != Variant::S && split == Split::Train && m.space.count(1)) forced.push_back(1);
  const LengthPlan plan = plan_lengths(size, m.space, forced);
  m.quotas = plan.quotas;
  if (plan.shortfall > 0)
    m.warnings.push_back("requested " + std::to_string(size) + " examples but the split only has " +
                         std::to_string(size - plan.shortfall) +
                         " distinct expressions; every expression is included once");

  std::vector<int> lengths;
  for (const auto& entry : plan.quotas) lengths.push_back(entry.first);
  std::vector<std::vector<Expression>> per_length(lengths.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t start = 0; start < lengths.size(); start += workers) {
    std::vector<std::future<std::vector<Expression>>> batch;
    for (std::size_t i = start; i < std::min(lengths.size(), start + workers); ++i) {
      const int len = lengths[i];
      const auto run = [&task, split, len, quota = plan.quotas.at(len), space = m.space.at(len)] {
        return generate_length(task, split, len, quota, space);
      };
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) per_length[start + i] = batch[i].get();
  }

  std::vector<Expression> all;
  for (auto& exprs : per_length)
    for (auto& e : exprs) all.push_back(std::move(e));
  RandomStream order_rng(derive_seed(config.seed, shard_index(split, 0)));
  order_rng.shuffle(std::span(all));

  ds.examples.reserve(all.size());
  for (const auto& e : all) {
    ds.examples.push_back(make_example(e, task.tables, split));
    ++m.counts[e.functions.size()];
  }
  for (int len : lengths) m.counts.try_emplace(len, 0);
  m.size = static_cast<long>(ds.examples.size());
  return ds;
}

}  // namespace ctlpp
