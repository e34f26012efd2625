#include "ctlpp/verifier.hpp"

#include <algorithm>
#include <sstream>

#include "ctlpp/dataset_io.hpp"
#include "ctlpp/errors.hpp"

namespace ctlpp {

namespace {

constexpr std::uint64_t kBruteForceLimit = 20'000'000;

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

bool is_path_group(const std::string& g, char path, char stage) {
  return g.size() == 3 && g[0] == 'G' && g[1] == path && g[2] == stage;
}

}  // namespace

std::string_view to_string(IssueKind k) {
  switch (k) {
    case IssueKind::Label: return "label";
    case IssueKind::Legality: return "legality";
    case IssueKind::Balance: return "balance";
    case IssueKind::Grid: return "single-function-grid";
    case IssueKind::Duplicate: return "duplicate";
    case IssueKind::Coverage: return "coverage";
    case IssueKind::Hash: return "hash";
  }
  return "?";
}

long VerificationReport::count(IssueKind k) const {
  return std::count_if(issues.begin(), issues.end(), [k](const Issue& i) { return i.kind == k; });
}

void VerificationReport::merge(const VerificationReport& other) {
  examples += other.examples;
  label_mismatches += other.label_mismatches;
  legality_violations += other.legality_violations;
  issues.insert(issues.end(), other.issues.begin(), other.issues.end());
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
  if (source.empty()) source = other.source;
  else if (!other.source.empty() && other.source != source) source += ", " + other.source;
}

nlohmann::ordered_json VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["source"] = source;
  j["ok"] = ok();
  j["examples"] = examples;
  j["label_mismatches"] = label_mismatches;
  j["legality_violations"] = legality_violations;
  auto& arr = j["issues"] = nlohmann::ordered_json::array();
  for (const auto& i : issues)
    arr.push_back({{"kind", std::string(ctlpp::to_string(i.kind))}, {"line", i.line}, {"message", i.message}});
  j["notes"] = notes;
  return j;
}

std::string VerificationReport::to_text(std::size_t max_issues_per_kind) const {
  std::ostringstream os;
  os << "verify " << source << ": " << (ok() ? "OK" : "FAILED") << "\n";
  os << "  examples:            " << examples << "\n";
  os << "  label mismatches:    " << label_mismatches << "\n";
  os << "  legality violations: " << legality_violations << "\n";
  std::map<IssueKind, std::size_t> shown;
  for (const auto& i : issues) {
    if (shown[i.kind]++ >= max_issues_per_kind) continue;
    os << "  [" << ctlpp::to_string(i.kind) << "]";
    if (i.line > 0) os << " line " << i.line << ":";
    os << " " << i.message << "\n";
  }
  for (const auto& [kind, n] : shown)
    if (n > max_issues_per_kind)
      os << "  ... " << (n - max_issues_per_kind) << " more " << ctlpp::to_string(kind) << " issues\n";
  for (const auto& note : notes) os << "  note: " << note << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------

Verifier::Verifier(const DatasetManifest& manifest, VerifyChecks checks)
    : manifest_(manifest), checks_(checks) {
  for (const auto& f : manifest_.functions) group_.emplace_back(to_string(f.group));

  if (!checks_.balance) return;
  const long nlengths = static_cast<long>(manifest_.quotas.size());
  if (nlengths == 0) return;
  const long share = manifest_.requested_size / nlengths;
  const bool ar_train = manifest_.config.variant != Variant::S && manifest_.split == Split::Train;
  const bool forced_debt = ar_train && static_cast<long>(manifest_.config.num_functions) *
                                               manifest_.config.num_symbols > share;
  if (forced_debt) {
    report_.notes.push_back("split too small for the equal-share rule next to the single-function grid; "
                            "saturation of short lengths not checked");
    return;
  }
  for (const auto& [len, quota] : manifest_.quotas)
    if (quota < share) saturated_lengths_.insert(len);
}

SymbolId Verifier::fold_tokens(const std::vector<std::string>& tokens, bool& ok) const {
  // Right-to-left rendering: start from the trailing symbol and walk back to the front.
  ok = false;
  if (tokens.size() < 2) return -1;
  SymbolId s = std::stoi(tokens.back());
  for (std::size_t k = tokens.size() - 1; k-- > 0;) {
    const std::size_t id = std::stoul(tokens[k].substr(1));
    if (id >= manifest_.functions.size()) return -1;
    const auto& mapping = manifest_.functions[id].mapping;
    if (s < 0 || static_cast<std::size_t>(s) >= mapping.size()) return -1;
    s = mapping[s];
  }
  ok = true;
  return s;
}

bool Verifier::legal(const std::vector<int>& fids, SymbolId input, std::string& why) const {
  const Variant v = manifest_.config.variant;
  const bool ood = manifest_.split == Split::Ood;
  const std::size_t n = fids.size();
  if (n == 0) {
    why = "no functions";
    return false;
  }

  if (v != Variant::S) {
    // A trains on alternation and tests on repetition; R the other way round.
    const bool want_alternation = (v == Variant::A) != ood;
    if (ood && n < 2) {
      why = "OOD example with a single function";
      return false;
    }
    for (std::size_t i = 1; i < n; ++i) {
      const bool same = group_[fids[i]] == group_[fids[i - 1]];
      if (same == want_alternation) {
        why = "positions " + std::to_string(i - 1) + "," + std::to_string(i) + " use groups " +
              group_[fids[i - 1]] + "," + group_[fids[i]];
        return false;
      }
    }
    return true;
  }

  if (n % 2 != 0) {
    why = "odd number of functions in variant S";
    return false;
  }
  SymbolId s = input;
  for (std::size_t i = 0; i < n; i += 2) {
    const std::string& first = group_[fids[i]];
    const std::string& second = group_[fids[i + 1]];
    const char path = is_path_group(first, 'a', '1') ? 'a' : is_path_group(first, 'b', '1') ? 'b' : 0;
    if (path == 0) {
      why = "pair " + std::to_string(i / 2) + " starts with " + first + ", not a stage-1 group";
      return false;
    }
    const SymbolId mid = manifest_.functions[fids[i]].mapping[s];
    const char other = path == 'a' ? 'b' : 'a';
    bool pair_ok = false;
    if (ood) {
      pair_ok = is_path_group(second, other, '2');
    } else if (is_path_group(second, path, '2')) {
      pair_ok = true;
    } else if (second == "Go" && manifest_.overlap) {
      for (const auto& sets : manifest_.overlap->sets) {
        if (sets.function != fids[i + 1]) continue;
        const auto& allowed = path == 'a' ? sets.path_a : sets.path_b;
        pair_ok = std::find(allowed.begin(), allowed.end(), mid) != allowed.end();
      }
    }
    if (!pair_ok) {
      why = "pair " + std::to_string(i / 2) + " is " + first + "->" + second + " at symbol " + std::to_string(mid);
      return false;
    }
    s = manifest_.functions[fids[i + 1]].mapping[mid];
  }
  return true;
}

void Verifier::observe(const Example& ex, long line) {
  ++report_.examples;
  const auto& tokens = ex.tokens;

  if (checks_.labels) {
    bool ok = false;
    const SymbolId expected = fold_tokens(tokens, ok);
    if (!ok || expected != ex.target) {
      ++report_.label_mismatches;
      report_.issues.push_back({IssueKind::Label, line,
                                "target " + std::to_string(ex.target) + ", tables give " + std::to_string(expected)});
    }
  }

  std::vector<int> fids;
  for (std::size_t k = tokens.size() - 1; k-- > 0;) fids.push_back(std::stoi(tokens[k].substr(1)));
  const SymbolId input = std::stoi(tokens.back());

  if (checks_.legality) {
    std::string why;
    const bool ok = legal(fids, input, why);
    if (!ok) {
      ++report_.legality_violations;
      const char* expect = manifest_.split == Split::Ood ? "not a test-only pattern: " : "not train-legal: ";
      report_.issues.push_back({IssueKind::Legality, line, expect + why});
    }
  }

  if (checks_.balance) {
    const int len = static_cast<int>(fids.size());
    ++histogram_[len];
    const std::string key = join(tokens);
    if (saturated_lengths_.count(len) && !distinct_[len].insert(key).second)
      report_.issues.push_back({IssueKind::Duplicate, line, "repeated expression '" + key +
                                                                "' in a length that must be enumerated once"});
    else if (manifest_.split != Split::Train && !test_seen_.insert(key).second)
      report_.issues.push_back({IssueKind::Duplicate, line, "repeated expression '" + key + "' in a test split"});
    if (len == 1) ++singles_[{fids[0], input}];
  }
}

std::uint64_t Verifier::brute_force_space(int length) const {
  const std::uint64_t nf = manifest_.functions.size();
  const int ns = manifest_.config.num_symbols;
  std::vector<int> fids(length, 0);
  std::uint64_t total = 0;
  std::string why;
  while (true) {
    for (SymbolId s = 0; s < ns; ++s)
      if (legal(fids, s, why)) ++total;
    int pos = length - 1;
    while (pos >= 0 && static_cast<std::uint64_t>(++fids[pos]) == nf) fids[pos--] = 0;
    if (pos < 0) break;
  }
  return total;
}

void Verifier::check_balance() {
  const TaskConfig& c = manifest_.config;
  const bool ood = manifest_.split == Split::Ood;
  auto issue = [&](IssueKind k, const std::string& msg) { report_.issues.push_back({k, 0, msg}); };

  long total = 0;
  for (const auto& [len, n] : histogram_) {
    total += n;
    const bool in_range = c.variant == Variant::S ? (len >= 2 && len <= c.max_functions && len % 2 == 0)
                                                  : (len >= (ood ? 2 : 1) && len <= c.max_functions);
    if (!in_range) issue(IssueKind::Balance, "length " + std::to_string(len) + " is outside the split's range");
  }
  if (total != manifest_.size)
    issue(IssueKind::Balance, "file holds " + std::to_string(total) + " examples, manifest size is " +
                                  std::to_string(manifest_.size));
  if (manifest_.warnings.empty() && manifest_.size != manifest_.requested_size)
    issue(IssueKind::Balance, "size " + std::to_string(manifest_.size) + " differs from requested " +
                                  std::to_string(manifest_.requested_size) + " without a warning");

  std::set<int> lengths;
  for (const auto& e : manifest_.quotas) lengths.insert(e.first);
  for (const auto& e : histogram_) lengths.insert(e.first);
  for (int len : lengths) {
    const long seen = histogram_.count(len) ? histogram_.at(len) : 0;
    const long quota = manifest_.quotas.count(len) ? manifest_.quotas.at(len) : 0;
    const long declared = manifest_.counts.count(len) ? manifest_.counts.at(len) : 0;
    if (seen != declared)
      issue(IssueKind::Balance, "length " + std::to_string(len) + ": " + std::to_string(seen) +
                                    " examples, manifest counts " + std::to_string(declared));
    if (seen != quota)
      issue(IssueKind::Balance, "length " + std::to_string(len) + ": " + std::to_string(seen) +
                                    " examples, quota " + std::to_string(quota));
  }

  const std::uint64_t nf = manifest_.functions.size();
  for (int len : saturated_lengths_) {
    const long seen = histogram_.count(len) ? histogram_.at(len) : 0;
    std::uint64_t pow = static_cast<std::uint64_t>(c.num_symbols);
    for (int i = 0; i < len && pow <= kBruteForceLimit; ++i) pow *= nf;
    std::uint64_t space = 0;
    if (pow <= kBruteForceLimit) {
      space = brute_force_space(len);
    } else {
      space = manifest_.space.count(len) ? manifest_.space.at(len) : 0;
      report_.notes.push_back("length " + std::to_string(len) + " space too large to enumerate; using manifest value");
    }
    if (static_cast<std::uint64_t>(seen) != space)
      issue(IssueKind::Balance, "length " + std::to_string(len) + " is below the equal share but holds " +
                                    std::to_string(seen) + " of " + std::to_string(space) + " distinct expressions");
  }

  if (c.variant != Variant::S && manifest_.split == Split::Train) {
    long missing = 0;
    for (int f = 0; f < c.num_functions; ++f) {
      for (int s = 0; s < c.num_symbols; ++s) {
        const auto it = singles_.find({f, s});
        const long n = it == singles_.end() ? 0 : it->second;
        if (n == 0) ++missing;
        else if (n > 1)
          issue(IssueKind::Grid, "single-function example f" + std::to_string(f) + " " + std::to_string(s) +
                                     " appears " + std::to_string(n) + " times");
      }
    }
    if (missing > 0)
      issue(IssueKind::Grid, std::to_string(missing) + " of " + std::to_string(c.num_functions * c.num_symbols) +
                                 " single-function examples are missing");
  }
}

void Verifier::check_coverage() {
  const TaskConfig& c = manifest_.config;
  auto issue = [&](const std::string& msg) { report_.issues.push_back({IssueKind::Coverage, 0, msg}); };
  if (c.variant != Variant::S) {
    if (manifest_.coverage_incomplete) issue("coverage_incomplete set on a variant without overlap sets");
    return;
  }
  const OverlapSpec& spec = *manifest_.overlap;
  const int n = c.num_symbols;
  long go_functions = 0;
  for (const auto& g : group_) go_functions += g == "Go";
  if (static_cast<long>(spec.sets.size()) != go_functions)
    issue("overlap sets cover " + std::to_string(spec.sets.size()) + " functions, Go has " +
          std::to_string(go_functions));

  std::vector<bool> covered(n, false);
  for (const auto& sets : spec.sets) {
    std::vector<int> in_a(n, 0), in_b(n, 0);
    for (SymbolId s : sets.path_a) if (s >= 0 && s < n) in_a[s] = 1;
    for (SymbolId s : sets.path_b) if (s >= 0 && s < n) in_b[s] = 1;
    int shared = 0, uni = 0;
    for (int s = 0; s < n; ++s) {
      shared += in_a[s] && in_b[s];
      uni += in_a[s] || in_b[s];
      if (in_a[s] && in_b[s]) covered[s] = true;
    }
    const std::string who = "f" + std::to_string(sets.function);
    if (group_.at(sets.function) != "Go") issue(who + " has overlap sets but is not in Go");
    if (shared != c.shared_symbols)
      issue(who + " shares " + std::to_string(shared) + " symbols, expected " + std::to_string(c.shared_symbols));
    if (uni != n) issue(who + ": S_a and S_b do not cover the alphabet");
    if (sets.path_a.size() != sets.path_b.size()) issue(who + ": |S_a| != |S_b|");
  }
  const bool full = std::all_of(covered.begin(), covered.end(), [](bool b) { return b; });
  const bool achievable = static_cast<long>(c.go_size) * c.shared_symbols >= n;
  if (manifest_.coverage_incomplete == full)
    issue(std::string("coverage_incomplete is ") + (manifest_.coverage_incomplete ? "true" : "false") +
          " but the shared symbols " + (full ? "do" : "do not") + " cover the alphabet");
  if (achievable != full)
    issue("shared-symbol union " + std::string(full ? "covers" : "misses part of") +
          " the alphabet although go_size * shared_symbols " + (achievable ? ">=" : "<") + " num_symbols");
}

VerificationReport Verifier::finish() {
  if (checks_.balance) {
    check_balance();
    check_coverage();
  }
  return report_;
}

// ---------------------------------------------------------------------------

namespace {

VerificationReport run(const Dataset& ds, VerifyChecks checks) {
  Verifier v(ds.manifest, checks);
  long line = 1;
  for (const auto& ex : ds.examples) v.observe(ex, ++line);
  auto report = v.finish();
  report.source = std::string(to_string(ds.manifest.split));
  return report;
}

}  // namespace

VerificationReport verify_labels(const Dataset& ds) { return run(ds, {true, false, false}); }
VerificationReport verify_split_legality(const Dataset& ds) { return run(ds, {false, true, false}); }
VerificationReport verify_balance_and_coverage(const Dataset& ds) { return run(ds, {false, false, true}); }
VerificationReport verify_dataset(const Dataset& ds) { return run(ds, {}); }

VerificationReport verify_file(const std::filesystem::path& path) {
  DatasetReader reader(path);
  Verifier v(reader.manifest());
  Example ex;
  while (reader.next(ex)) v.observe(ex, reader.line());
  auto report = v.finish();
  report.source = path.string();
  if (!reader.hash_matches())
    report.issues.push_back({IssueKind::Hash, 0,
                             "content hash " + reader.computed_hash() + " does not match manifest " +
                                 reader.manifest().content_hash});
  return report;
}

}  // namespace ctlpp
