#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ctlpp/datasetgen.hpp"

namespace ctlpp {

// The verifier deliberately re-derives labels and legality from the manifest
// on its own. It must not call evaluate(), the samplers or the sampling-graph
// walkers: it is the oracle those are checked against.

enum class IssueKind { Label, Legality, Balance, Grid, Duplicate, Coverage, Hash };

std::string_view to_string(IssueKind k);

struct Issue {
  IssueKind kind;
  long line = 0;  // 0 when the issue is not tied to one line
  std::string message;
};

struct VerificationReport {
  std::string source;
  long examples = 0;
  long label_mismatches = 0;
  long legality_violations = 0;
  std::vector<Issue> issues;
  std::vector<std::string> notes;

  bool ok() const { return issues.empty(); }
  long count(IssueKind k) const;
  /// Appends other's findings; counts add up.
  void merge(const VerificationReport& other);

  nlohmann::ordered_json to_json() const;
  std::string to_text(std::size_t max_issues_per_kind = 20) const;
};

struct VerifyChecks {
  bool labels = true;
  bool legality = true;
  bool balance = true;
};

/// Streaming checker over one split: feed every example, then finish().
class Verifier {
 public:
  explicit Verifier(const DatasetManifest& manifest, VerifyChecks checks = {});

  void observe(const Example& ex, long line);
  VerificationReport finish();

 private:
  SymbolId fold_tokens(const std::vector<std::string>& tokens, bool& ok) const;
  bool legal(const std::vector<int>& fids, SymbolId input, std::string& why) const;
  std::uint64_t brute_force_space(int length) const;
  void check_balance();
  void check_coverage();

  DatasetManifest manifest_;
  VerifyChecks checks_;
  VerificationReport report_;
  std::vector<std::string> group_;  // group name per function id
  std::map<int, long> histogram_;
  std::set<int> saturated_lengths_;
  std::map<int, std::unordered_set<std::string>> distinct_;
  std::unordered_set<std::string> test_seen_;
  std::map<std::pair<int, int>, long> singles_;
};

VerificationReport verify_labels(const Dataset& dataset);
VerificationReport verify_split_legality(const Dataset& dataset);
VerificationReport verify_balance_and_coverage(const Dataset& dataset);
VerificationReport verify_dataset(const Dataset& dataset);

/// Streams a file through every check, including the content hash.
VerificationReport verify_file(const std::filesystem::path& path);

}  // namespace ctlpp
