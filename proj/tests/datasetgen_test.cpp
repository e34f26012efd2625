#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "ctlpp/dataset_io.hpp"
#include "ctlpp/datasetgen.hpp"
#include "ctlpp/errors.hpp"

using namespace ctlpp;
namespace fs = std::filesystem;

namespace {

TaskConfig small(Variant v, std::uint64_t seed = 0, long train = 5000, long test = 500) {
  TaskConfig c;
  c.variant = v;
  c.num_symbols = 8;
  c.num_functions = 32;
  c.train_size = train;
  c.test_size = test;
  c.seed = seed;
  if (v == Variant::S) {
    c.go_size = 8;
    c.shared_symbols = 4;
  }
  return c;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ctlpp_dsgen_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

long max_rss_kb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss;
}

}  // namespace

TEST(TokensTest, RenderExamples) {
  EXPECT_EQ(render_tokens({2, {3, 17}}), (std::vector<std::string>{"f17", "f3", "2"}));
  EXPECT_EQ(render_tokens({0, {5}}), (std::vector<std::string>{"f5", "0"}));
}

TEST(TokensTest, ParseErrors) {
  using V = std::vector<std::string>;
  EXPECT_THROW(parse_tokens(V{"f99", "2"}, 32, 8), ParseError);
  EXPECT_THROW(parse_tokens(V{"f1", "8"}, 32, 8), ParseError);
  EXPECT_THROW(parse_tokens(V{"f01", "2"}, 32, 8), ParseError);
  EXPECT_THROW(parse_tokens(V{"f1", "2", "f3", "1"}, 32, 8), ParseError);
  EXPECT_THROW(parse_tokens(V{"2"}, 32, 8), ParseError);
  EXPECT_THROW(parse_tokens(V{"f1", "f2"}, 32, 8), ParseError);
  EXPECT_THROW(parse_tokens(V{"g1", "2"}, 32, 8), ParseError);
  EXPECT_THROW(parse_tokens(V{}, 32, 8), ParseError);
}

TEST(TokensTest, FuzzRoundTrip) {
  RandomStream rng(123);
  for (int i = 0; i < 10000; ++i) {
    const int nf = 1 + static_cast<int>(rng.uniform_below(64));
    const int ns = 1 + static_cast<int>(rng.uniform_below(16));
    Expression e;
    e.input = static_cast<SymbolId>(rng.uniform_below(ns));
    const int len = 1 + static_cast<int>(rng.uniform_below(8));
    for (int k = 0; k < len; ++k) e.functions.push_back(static_cast<FunctionId>(rng.uniform_below(nf)));
    ASSERT_EQ(parse_tokens(render_tokens(e), nf, ns), e);
  }
}

TEST(PlanLengthsTest, EqualShareRemainderToLongest) {
  const std::map<int, std::uint64_t> space = {{1, 1000}, {2, 1000}, {3, 1000}};
  const auto plan = plan_lengths(10, space);
  EXPECT_EQ(plan.quotas, (std::map<int, long>{{1, 3}, {2, 3}, {3, 4}}));
  EXPECT_EQ(plan.shortfall, 0);
}

TEST(PlanLengthsTest, CapsMoveToLongest) {
  const std::map<int, std::uint64_t> space = {{1, 2}, {2, 8}, {3, 1000}, {4, 1000}};
  const auto plan = plan_lengths(40, space);
  EXPECT_EQ(plan.quotas, (std::map<int, long>{{1, 2}, {2, 8}, {3, 10}, {4, 20}}));
  const auto tiny = plan_lengths(100, {{1, 2}, {2, 8}});
  EXPECT_EQ(tiny.quotas, (std::map<int, long>{{1, 2}, {2, 8}}));
  EXPECT_EQ(tiny.shortfall, 90);
}

TEST(PlanLengthsTest, ForcedLengthsTakeWholeSpace) {
  const std::map<int, std::uint64_t> space = {{1, 256}, {2, 4096}, {3, 65536}};
  const std::vector<int> forced = {1};
  const auto plan = plan_lengths(300, space, forced);
  EXPECT_EQ(plan.quotas.at(1), 256);
  long total = 0;
  for (const auto& [len, q] : plan.quotas) total += q;
  EXPECT_EQ(total, 300);
  EXPECT_THROW(plan_lengths(100, space, forced), ConfigError);
}

TEST(GenerateTest, VariantATrainContainsFullGrid) {
  const Task task = make_task(small(Variant::A, 2));
  const Dataset ds = generate_split(task, Split::Train);
  std::set<std::pair<FunctionId, SymbolId>> singles;
  for (const auto& ex : ds.examples)
    if (ex.length() == 1) singles.insert({ex.expression.functions[0], ex.expression.input});
  EXPECT_EQ(singles.size(), 32u * 8u);
  EXPECT_EQ(ds.manifest.size, 5000);
  EXPECT_EQ(static_cast<long>(ds.examples.size()), 5000);
}

TEST(GenerateTest, VariantSTrainUsesEvenLengths) {
  const Dataset ds = generate_split(small(Variant::S, 1), Split::Train);
  std::set<int> lengths;
  for (const auto& ex : ds.examples) lengths.insert(ex.length());
  EXPECT_EQ(lengths, (std::set<int>{2, 4, 6}));
}

TEST(GenerateTest, TinyInstanceIncludesWholeSpace) {
  TaskConfig c = small(Variant::A);
  c.num_symbols = 2;
  c.num_functions = 2;
  c.max_functions = 2;
  c.train_size = 100;
  const Dataset ds = generate_split(c, Split::Train);
  // One function per group; length 2 alternates: 2 orders x 2 inputs.
  std::set<Expression> len2;
  for (const auto& ex : ds.examples)
    if (ex.length() == 2) len2.insert(ex.expression);
  EXPECT_EQ(ds.manifest.space.at(2), len2.size());
  EXPECT_EQ(len2.size(), 4u);
  EXPECT_FALSE(ds.manifest.warnings.empty());
}

TEST(GenerateTest, TestSplitsAreDistinct) {
  for (Variant v : {Variant::A, Variant::R, Variant::S}) {
    for (Split split : {Split::Iid, Split::Ood}) {
      const Dataset ds = generate_split(small(v, 5, 1000, 3000), split);
      std::set<Expression> uniq;
      for (const auto& ex : ds.examples) uniq.insert(ex.expression);
      EXPECT_EQ(uniq.size(), ds.examples.size()) << to_string(v) << " " << to_string(split);
    }
  }
}

TEST(GenerateTest, IndependentOfJobs) {
  for (Variant v : {Variant::A, Variant::S}) {
    const Task task = make_task(small(v, 11));
    const Dataset one = generate_split(task, Split::Train, 1);
    const Dataset four = generate_split(task, Split::Train, 4);
    EXPECT_EQ(one.examples, four.examples);
    EXPECT_EQ(one.manifest, four.manifest);
  }
}

TEST(GenerateTest, SeedsChangeOutput) {
  const Dataset a = generate_split(small(Variant::R, 1), Split::Train);
  const Dataset b = generate_split(small(Variant::R, 2), Split::Train);
  EXPECT_NE(a.examples, b.examples);
}

// ---------------------------------------------------------------------------

TEST(DatasetIoTest, ExampleLineIsByteExact) {
  Example ex;
  ex.expression = {2, {17, 3}};
  ex.tokens = {"f3", "f17", "2"};
  ex.target = 5;
  EXPECT_EQ(format_example_line(ex), R"({"tokens": ["f3","f17","2"], "target": 5, "len": 2})");
}

TEST(DatasetIoTest, WriteReadRoundTrip) {
  const auto dir = temp_dir("roundtrip");
  for (Variant v : {Variant::A, Variant::R, Variant::S}) {
    const Dataset ds = generate_split(small(v, 3, 2000, 200), Split::Iid);
    const auto path = dir / (std::string(to_string(v)) + ".jsonl");
    const DatasetManifest written = write_dataset(ds, path);
    const Dataset back = read_dataset(path);
    EXPECT_EQ(back.manifest, written);
    ASSERT_EQ(back.examples.size(), ds.examples.size());
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
      EXPECT_EQ(back.examples[i].expression, ds.examples[i].expression);
      EXPECT_EQ(back.examples[i].target, ds.examples[i].target);
    }
    // Same input, same bytes.
    write_dataset(ds, dir / "again.jsonl");
    EXPECT_EQ(slurp(path), slurp(dir / "again.jsonl"));
  }
  fs::remove_all(dir);
}

TEST(DatasetIoTest, DetectsTamperingAndVersion) {
  const auto dir = temp_dir("tamper");
  const Dataset ds = generate_split(small(Variant::A, 3, 500, 50), Split::Iid);
  const auto path = dir / "d.jsonl";
  write_dataset(ds, path);
  std::string text = slurp(path);

  // Flip one target: the line still parses, the hash no longer matches.
  const auto pos = text.find("\"target\": ", text.find('\n'));
  std::string tampered = text;
  char& digit = tampered[pos + 10];
  digit = digit == '0' ? '1' : '0';
  std::ofstream(dir / "t.jsonl", std::ios::binary) << tampered;
  EXPECT_THROW(read_dataset(dir / "t.jsonl"), ParseError);
  DatasetReader reader(dir / "t.jsonl");
  Example ex;
  while (reader.next(ex)) {
  }
  EXPECT_FALSE(reader.hash_matches());

  std::string old = text;
  old.replace(old.find("ctlpp-v1"), 8, "ctlpp-v0");
  std::ofstream(dir / "v.jsonl", std::ios::binary) << old;
  EXPECT_THROW(DatasetReader{dir / "v.jsonl"}, ParseError);

  std::string bad = text + "{\"tokens\": [\"f1\"], \"target\": 0, \"len\": 1}\n";
  std::ofstream(dir / "b.jsonl", std::ios::binary) << bad;
  try {
    read_dataset(dir / "b.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), static_cast<long>(ds.examples.size()) + 2);
  }
  EXPECT_THROW(DatasetReader{dir / "missing.jsonl"}, IoError);
  fs::remove_all(dir);
}

TEST(DatasetIoTest, StreamingReadKeepsMemoryFlat) {
  const auto dir = temp_dir("stream");
  const auto path = dir / "train.jsonl";
  const pid_t child = fork();
  ASSERT_GE(child, 0);
  if (child == 0) {
    TaskConfig c;  // default size: 300k examples
    c.seed = 9;
    write_dataset(generate_split(c, Split::Train), path);
    _exit(0);
  }
  int status = 0;
  waitpid(child, &status, 0);
  ASSERT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0);
  const auto file_kb = static_cast<long>(fs::file_size(path) / 1024);

  const long before = max_rss_kb();
  DatasetReader reader(path);
  Example ex;
  long n = 0;
  while (reader.next(ex)) ++n;
  const long growth = max_rss_kb() - before;
  EXPECT_EQ(n, 300000);
  EXPECT_TRUE(reader.hash_matches());
  EXPECT_LT(growth, file_kb / 4) << "file " << file_kb << " KiB, rss grew " << growth << " KiB";
  fs::remove_all(dir);
}
