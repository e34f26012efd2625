#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "ctlpp/dataset_io.hpp"
#include "ctlpp/datasetgen.hpp"
#include "ctlpp/verifier.hpp"

using namespace ctlpp;
namespace fs = std::filesystem;

namespace {

TaskConfig config(Variant v, int symbols, int functions, std::uint64_t seed, long size = 3000) {
  TaskConfig c;
  c.variant = v;
  c.num_symbols = symbols;
  c.num_functions = functions;
  c.seed = seed;
  c.train_size = size;
  c.test_size = size;
  if (v == Variant::S) {
    c.go_size = functions >= 32 ? 8 : 4;
    c.shared_symbols = symbols / 2;
  }
  return c;
}

std::string summary(const VerificationReport& r) { return r.to_text(); }

// Index of the first example with the given length.
std::size_t first_of_length(const Dataset& ds, int len) {
  for (std::size_t i = 0; i < ds.examples.size(); ++i)
    if (ds.examples[i].length() == len) return i;
  return ds.examples.size();
}

}  // namespace

TEST(VerifierTest, GeneratedDatasetsAreClean) {
  for (Variant v : {Variant::A, Variant::R, Variant::S}) {
    for (auto [ns, nf] : {std::pair{4, 8}, std::pair{8, 32}}) {
      for (std::uint64_t seed : {0u, 1u}) {
        for (Split split : {Split::Train, Split::Iid, Split::Ood}) {
          const Dataset ds = generate_split(config(v, ns, nf, seed), split);
          const auto report = verify_dataset(ds);
          EXPECT_TRUE(report.ok()) << to_string(v) << " " << ns << "/" << nf << " " << to_string(split) << "\n"
                                   << summary(report);
          EXPECT_EQ(report.examples, static_cast<long>(ds.examples.size()));
        }
      }
    }
  }
}

TEST(VerifierTest, FlippedTargetReportedAtItsLine) {
  Dataset ds = generate_split(config(Variant::A, 8, 32, 3), Split::Iid);
  const std::size_t victim = 137;
  auto& ex = ds.examples[victim];
  ex.target = (ex.target + 1) % 8;
  const auto report = verify_labels(ds);
  EXPECT_EQ(report.label_mismatches, 1);
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_EQ(report.issues[0].kind, IssueKind::Label);
  EXPECT_EQ(report.issues[0].line, static_cast<long>(victim) + 2);  // line 1 is the manifest
}

TEST(VerifierTest, IllegalExampleDetected) {
  Dataset ds = generate_split(config(Variant::A, 8, 32, 4), Split::Train);
  const auto i = first_of_length(ds, 2);
  ASSERT_LT(i, ds.examples.size());
  // Replace the outer function with one from the inner function's own group.
  auto e = ds.examples[i].expression;
  const Group g = ds.manifest.functions[e.functions[0]].group;
  for (const auto& f : ds.manifest.functions)
    if (f.group == g && f.id != e.functions[0]) {
      e.functions[1] = f.id;
      break;
    }
  ds.examples[i] = make_example(e, ds.manifest.functions, Split::Train);
  const auto report = verify_split_legality(ds);
  EXPECT_EQ(report.legality_violations, 1);
  EXPECT_EQ(report.count(IssueKind::Legality), 1);
  EXPECT_TRUE(verify_labels(ds).ok());
}

TEST(VerifierTest, OodLegalityInS) {
  Dataset ds = generate_split(config(Variant::S, 8, 32, 4), Split::Ood);
  EXPECT_TRUE(verify_split_legality(ds).ok());
  // A train-legal pair is not a test pattern.
  Dataset train = generate_split(config(Variant::S, 8, 32, 4), Split::Train);
  ds.examples[0] = train.examples[0];
  ds.examples[0].split = Split::Ood;
  EXPECT_EQ(verify_split_legality(ds).legality_violations, 1);
}

TEST(VerifierTest, MissingSingleFunctionRow) {
  Dataset ds = generate_split(config(Variant::R, 8, 32, 5), Split::Train);
  const auto i = first_of_length(ds, 1);
  ds.examples.erase(ds.examples.begin() + static_cast<long>(i));
  --ds.manifest.size;
  --ds.manifest.counts[1];
  const auto report = verify_balance_and_coverage(ds);
  EXPECT_EQ(report.count(IssueKind::Grid), 1) << summary(report);
}

TEST(VerifierTest, QuotaViolation) {
  Dataset ds = generate_split(config(Variant::A, 8, 32, 6), Split::Iid);
  // Move one example from the longest length to length 3 by truncation.
  const int longest = ds.manifest.quotas.rbegin()->first;
  for (auto& ex : ds.examples)
    if (ex.length() == longest) {
      auto e = ex.expression;
      e.functions.resize(3);
      ex = make_example(e, ds.manifest.functions, Split::Iid);
      break;
    }
  const auto report = verify_balance_and_coverage(ds);
  EXPECT_GE(report.count(IssueKind::Balance), 2) << summary(report);
  EXPECT_TRUE(verify_labels(ds).ok());
}

TEST(VerifierTest, DuplicateInTestSplit) {
  Dataset ds = generate_split(config(Variant::R, 8, 32, 6), Split::Ood);
  ds.examples.back() = ds.examples.front();
  EXPECT_GE(verify_balance_and_coverage(ds).count(IssueKind::Duplicate), 1);
}

TEST(VerifierTest, CoverageFlagMustMatchOverlap) {
  TaskConfig c = config(Variant::S, 8, 32, 2);
  c.go_size = 1;
  c.shared_symbols = 2;
  Dataset ds = generate_split(c, Split::Train);
  EXPECT_TRUE(ds.manifest.coverage_incomplete);
  EXPECT_TRUE(verify_balance_and_coverage(ds).ok()) << summary(verify_balance_and_coverage(ds));
  ds.manifest.coverage_incomplete = false;
  EXPECT_GE(verify_balance_and_coverage(ds).count(IssueKind::Coverage), 1);
}

TEST(VerifierTest, FileHashChecked) {
  const auto dir = fs::temp_directory_path() / ("ctlpp_verify_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const Dataset ds = generate_split(config(Variant::A, 8, 32, 7), Split::Iid);
  write_dataset(ds, dir / "ok.jsonl");
  EXPECT_TRUE(verify_file(dir / "ok.jsonl").ok());

  std::ifstream in(dir / "ok.jsonl");
  std::string text{std::istreambuf_iterator<char>(in), {}};
  const auto last = text.rfind("\"target\": ");
  text[last + 10] = text[last + 10] == '0' ? '1' : '0';
  std::ofstream(dir / "bad.jsonl") << text;
  const auto report = verify_file(dir / "bad.jsonl");
  EXPECT_EQ(report.label_mismatches, 1);
  EXPECT_EQ(report.count(IssueKind::Hash), 1);
  EXPECT_EQ(report.issues.front().line, static_cast<long>(ds.examples.size()) + 1);
  fs::remove_all(dir);
}

TEST(VerifierTest, ReportMergeAndJson) {
  VerificationReport a, b;
  a.examples = 3;
  a.label_mismatches = 1;
  a.issues.push_back({IssueKind::Label, 2, "x"});
  b.examples = 4;
  a.merge(b);
  EXPECT_EQ(a.examples, 7);
  EXPECT_FALSE(a.ok());
  const auto j = a.to_json();
  EXPECT_EQ(j["label_mismatches"], 1);
  EXPECT_EQ(j["issues"][0]["kind"], "label");
}
