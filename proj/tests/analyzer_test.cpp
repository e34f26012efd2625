#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "ctlpp/analyzer.hpp"
#include "ctlpp/errors.hpp"
#include "ctlpp/report.hpp"
#include "test_support.hpp"

using namespace ctlpp;
using namespace ctlpp::testing;
namespace fs = std::filesystem;

namespace {

std::vector<FunctionTable> tables_a(int ns = 8, int nf = 32, std::uint64_t seed = 0) {
  TaskConfig c;
  c.num_symbols = ns;
  c.num_functions = nf;
  RandomStream rng(seed);
  return build_functions(c, rng);
}

int is_ga(const FunctionTable& f) { return f.group == Group::Ga ? 0 : 1; }

SeedMetrics metric(std::uint64_t seed, Variant v, double iid, double ood, std::optional<int> go = std::nullopt,
                   std::optional<int> x = std::nullopt, bool converged = true) {
  SeedMetrics m;
  m.seed = seed;
  m.model = "lstm";
  m.variant = v;
  m.iid = iid;
  m.ood = ood;
  m.steps = 1000;
  m.converged = converged;
  m.go_size = go;
  m.shared_symbols = x;
  return m;
}

}  // namespace

TEST(CosineTest, IdenticalRowsGiveOnes) {
  Eigen::MatrixXd rows(5, 3);
  rows.rowwise() = Eigen::RowVector3d(0.3, -1.2, 2.0);
  const auto sim = cosine_similarity(rows);
  EXPECT_TRUE(sim.isApprox(Eigen::MatrixXd::Ones(5, 5), 1e-12));
  EXPECT_EQ(num_clusters(detect_clusters(sim)), 1);
}

TEST(CosineTest, OrthogonalBlocks) {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(6, 4);
  for (int i = 0; i < 3; ++i) rows(i, 0) = 1 + i;
  for (int i = 3; i < 6; ++i) rows(i, 2) = -1 - i;
  const auto sim = cosine_similarity(rows);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(sim(i, j), (i < 3) == (j < 3) ? 1.0 : 0.0, 1e-12);
  EXPECT_EQ(detect_clusters(sim), (std::vector<int>{0, 0, 0, 1, 1, 1}));
}

TEST(CosineTest, SymmetricUnitDiagonalInRange) {
  RandomStream rng(3);
  Eigen::MatrixXf rows(20, 7);
  for (int i = 0; i < rows.rows(); ++i)
    for (int j = 0; j < rows.cols(); ++j) rows(i, j) = static_cast<float>(rng.uniform_real() * 2 - 1);
  const auto sim = cosine_similarity(rows);
  static_assert(std::is_same_v<decltype(sim)::Scalar, float>);
  EXPECT_TRUE(sim.isApprox(sim.transpose()));
  EXPECT_EQ(sim, sim.transpose());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sim(i, i), 1.0f);
  EXPECT_LE(sim.maxCoeff(), 1.0f);
  EXPECT_GE(sim.minCoeff(), -1.0f);
}

TEST(CosineTest, ZeroNormRows) {
  Eigen::MatrixXd rows(3, 2);
  rows << 1, 0, 0, 0, 2, 0;
  std::vector<int> zero;
  const auto sim = cosine_similarity(rows, &zero);
  EXPECT_EQ(zero, (std::vector<int>{1}));
  EXPECT_EQ(sim(1, 1), 0.0);
  EXPECT_EQ(sim(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(sim(0, 2), 1.0);
  EXPECT_EQ(detect_clusters(sim), (std::vector<int>{0, 1, 0}));
}

TEST(CosineTest, DumpCosineWarnsOnZeroNorm) {
  const auto tables = tables_a(4, 4);
  auto dump = codebook_dump(tables, 4, is_ga, 16, 0.0, 1);
  dump.at(2, 1).setZero();
  const auto r = cosine_matrix(dump, 1);
  EXPECT_EQ(r.zero_norm, (std::vector<FunctionId>{2}));
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(ClusterTest, ExpressionInputsAndThreshold) {
  Eigen::MatrixXd rows(4, 2);
  rows << 1, 0, 0.9, 0.1, 0, 1, 0.1, 0.9;
  // Expressions are accepted directly.
  EXPECT_EQ(num_clusters(detect_clusters(cosine_similarity(rows * 2.0), 0.8)), 2);
  EXPECT_EQ(num_clusters(detect_clusters(cosine_similarity(rows), -1.0)), 1);
  EXPECT_EQ(num_clusters(detect_clusters(cosine_similarity(rows), 1.01)), 4);
}

TEST(ClusterTest, LabelOrderBySizeThenSmallestMember) {
  Eigen::MatrixXd sim = Eigen::MatrixXd::Identity(5, 5);
  sim(1, 3) = sim(3, 1) = 1;
  sim(3, 4) = sim(4, 3) = 1;
  EXPECT_EQ(detect_clusters(sim), (std::vector<int>{1, 0, 2, 0, 0}));
}

TEST(ClusterTest, PermutationInvariance) {
  const auto tables = tables_a();
  const auto dump = codebook_dump(tables, 8, is_ga, 64, 0.05, 4);
  const Eigen::MatrixXd rows = dump.rows_for_symbol(3);
  const auto base = detect_clusters(cosine_similarity(rows));
  std::vector<int> perm(rows.rows());
  std::iota(perm.begin(), perm.end(), 0);
  RandomStream rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    rng.shuffle(std::span(perm));
    Eigen::MatrixXd permuted(rows.rows(), rows.cols());
    for (int i = 0; i < rows.rows(); ++i) permuted.row(i) = rows.row(perm[i]);
    const auto labels = detect_clusters(cosine_similarity(permuted));
    // Same partition: i ~ j in the permuted order iff perm[i] ~ perm[j] originally.
    for (int i = 0; i < rows.rows(); ++i)
      for (int j = 0; j < rows.rows(); ++j)
        ASSERT_EQ(labels[i] == labels[j], base[perm[i]] == base[perm[j]]);
  }
}

TEST(ClusterTest, CodebooksRecovered) {
  const auto tables = tables_a();
  for (int k : {1, 2}) {
    const auto dump = codebook_dump(tables, 8, [k](const FunctionTable& f) { return k == 1 ? 0 : is_ga(f); }, 64,
                                    0.02, 7);
    for (SymbolId s = 0; s < 8; ++s) EXPECT_EQ(num_clusters(detect_clusters(cosine_matrix(dump, s).matrix)), k);
  }
}

// ---------------------------------------------------------------------------

TEST(CompatibilityTest, PerfectPredictorIsAllOnes) {
  const auto tables = tables_a();
  const auto preds = two_step_predictions(tables, 8, [](auto&, auto&) { return true; });
  const auto grid = compatibility_grid(preds, tables, 2, group_partition(tables), group_partition(tables));
  EXPECT_EQ(grid.rows, (std::vector<std::string>{"Ga", "Gb"}));
  EXPECT_TRUE(grid.accuracy.isApprox(Eigen::MatrixXd::Ones(2, 2)));
  EXPECT_EQ(grid.pairs, Eigen::MatrixXi::Constant(2, 2, 256));
}

TEST(CompatibilityTest, GaOnlyPredictor) {
  const auto tables = tables_a();
  const auto preds =
      two_step_predictions(tables, 8, [](auto&, const FunctionTable& f2) { return f2.group == Group::Ga; });
  for (SymbolId s = 0; s < 8; ++s) {
    const auto grid = compatibility_grid(preds, tables, s, group_partition(tables), group_partition(tables));
    Eigen::MatrixXd expected(2, 2);
    expected << 1, 0, 1, 0;
    EXPECT_TRUE(grid.accuracy.isApprox(expected));
  }
}

TEST(CompatibilityTest, MatchesBruteForceRecount) {
  const auto tables = tables_a(4, 8, 2);
  RandomStream rng(5);
  PredictionDump preds;
  for (const auto& f1 : tables)
    for (const auto& f2 : tables)
      for (SymbolId x = 0; x < 4; ++x)
        if (rng.uniform_below(5) != 0)  // leave some records out
          preds.records.push_back({f1.id, f2.id, x, static_cast<SymbolId>(rng.uniform_below(4))});
  const std::vector<int> clusters = {0, 1, 0, 2, 1, 0, 2, 2};
  const auto rows = cluster_partition(clusters);
  const auto cols = group_partition(tables);
  for (SymbolId s = 0; s < 4; ++s) {
    const auto grid = compatibility_grid(preds, tables, s, rows, cols);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 2; ++c) {
        long n = 0, ok = 0;
        for (const auto& rec : preds.records) {
          if (clusters[rec.f1] != r || cols.of[rec.f2] != c) continue;
          if (apply(tables[rec.f1], rec.input) != s) continue;
          ++n;
          ok += rec.pred == apply(tables[rec.f2], s);
        }
        EXPECT_EQ(grid.pairs(r, c), n);
        if (n == 0) {
          EXPECT_TRUE(std::isnan(grid.accuracy(r, c)));
          EXPECT_FALSE(grid.cell(r, c));
        } else {
          EXPECT_DOUBLE_EQ(grid.accuracy(r, c), static_cast<double>(ok) / n);
        }
      }
  }
}

TEST(CompatibilityTest, EmptyCellsAreUndefined) {
  const auto tables = tables_a(4, 4);
  PredictionDump preds;
  const auto grid = compatibility_grid(preds, tables, 0, group_partition(tables), group_partition(tables));
  EXPECT_TRUE(grid.accuracy.array().isNaN().all());
  EXPECT_EQ(grid.pairs.sum(), 0);
}

// ---------------------------------------------------------------------------

TEST(AggregateTest, TwoSeedExample) {
  const std::vector<double> v = {1.0, 0.5};
  const auto s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 0.75);
  EXPECT_DOUBLE_EQ(s.std, 0.25);
  EXPECT_DOUBLE_EQ(s.success_rate, 0.5);
  EXPECT_EQ(s.count, 2);
  const std::vector<double> at = {0.95};
  EXPECT_EQ(summarize(at).success_rate, 0.0);  // strictly above
  EXPECT_EQ(summarize(std::span<const double>{}).count, 0);
}

TEST(AggregateTest, PermutationInvariantAndMonotone) {
  RandomStream rng(2);
  std::vector<double> v(25);
  for (auto& x : v) x = rng.uniform_real();
  const auto base = summarize(v);
  for (int t = 0; t < 5; ++t) {
    rng.shuffle(std::span(v));
    const auto s = summarize(v);
    EXPECT_NEAR(s.mean, base.mean, 1e-12);
    EXPECT_NEAR(s.std, base.std, 1e-12);
    EXPECT_EQ(s.success_rate, base.success_rate);
  }
  double prev = 2;
  for (double tau = 0; tau <= 1.0; tau += 0.05) {
    const double rate = summarize(v, tau).success_rate;
    EXPECT_LE(rate, prev);
    prev = rate;
  }
}

TEST(AggregateTest, RowsPerModelVariantSplit) {
  const std::vector<SeedMetrics> m = {metric(0, Variant::A, 1.0, 1.0), metric(1, Variant::A, 1.0, 0.5),
                                      metric(0, Variant::R, 0.9, 0.2, std::nullopt, std::nullopt, false)};
  const auto rows = aggregate_seeds(m);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].split, "ood");
  EXPECT_DOUBLE_EQ(rows[1].stats.mean, 0.75);
  EXPECT_DOUBLE_EQ(rows[1].stats.std, 0.25);
  EXPECT_DOUBLE_EQ(rows[1].stats.success_rate, 0.5);
  EXPECT_EQ(rows[2].variant, Variant::R);
  const auto converged = aggregate_seeds(m, 0.95, true);
  EXPECT_EQ(converged.size(), 2u);
  const auto text = aggregate_table_text(rows);
  EXPECT_NE(text.find("0.75 ± 0.25"), std::string::npos) << text;
}

TEST(HeatmapTest, SingleCellAndMissing) {
  const std::vector<SeedMetrics> one = {metric(0, Variant::S, 1, 0.4, 8, 4), metric(1, Variant::S, 1, 0.6, 8, 4)};
  const auto h = heatmap_table(one);
  ASSERT_EQ(h.mean_ood.rows(), 1);
  ASSERT_EQ(h.mean_ood.cols(), 1);
  EXPECT_DOUBLE_EQ(h.mean_ood(0, 0), 0.5);
  EXPECT_EQ(h.seeds(0, 0), 2);
  EXPECT_TRUE(h.missing.empty());

  const auto g = heatmap_table(one, {0, 8}, {4, 8});
  EXPECT_EQ(g.missing.size(), 3u);
  EXPECT_TRUE(std::isnan(g.mean_ood(0, 0)));
}

TEST(HeatmapTest, CsvAndSvgAgree) {
  std::vector<SeedMetrics> m;
  RandomStream rng(8);
  for (int go : {0, 2, 4, 8, 16})
    for (int x : {0, 2, 4, 6, 8})
      if (!(go == 2 && x == 6))
        m.push_back(metric(0, Variant::S, 1, std::round(rng.uniform_real() * 1e6) / 1e6, go, x));
  const auto h = heatmap_table(m);
  const std::string csv = heatmap_csv(h);
  const std::string svg = heatmap_svg(h);

  // CSV: header then one row per go_size ascending.
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::map<std::pair<int, int>, std::string> from_csv;
  int r = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    fields.resize(h.shared_symbols.size() + 1);
    for (std::size_t c = 0; c < h.shared_symbols.size(); ++c) from_csv[{r, static_cast<int>(c)}] = fields[c + 1];
    ++r;
  }
  EXPECT_EQ(r, 5);
  EXPECT_EQ((from_csv[{1, 3}]), "");

  // SVG: rows flipped so the largest go_size is on top.
  const std::regex cell(R"re(data-row="(\d+)" data-col="(\d+)" data-value="([^"]*)")re");
  int cells = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), cell); it != std::sregex_iterator(); ++it) {
    const int row = 4 - std::stoi((*it)[1]);
    const int col = std::stoi((*it)[2]);
    EXPECT_EQ((*it)[3].str(), (from_csv[{row, col}])) << row << "," << col;
    ++cells;
  }
  EXPECT_EQ(cells, 25);
}

// ---------------------------------------------------------------------------

TEST(ReportTest, EmitsExpectedFilesDeterministically) {
  const auto tables = tables_a();
  const auto dump = codebook_dump(tables, 8, is_ga, 64, 0.02, 1);
  const auto preds = two_step_predictions(tables, 8, [](auto&, auto&) { return true; });
  const auto report = analyze(dump, &preds, tables, 0.8);
  ASSERT_EQ(report.symbols.size(), 8u);
  for (const auto& s : report.symbols) {
    EXPECT_EQ(num_clusters(s.clusters), 2);
    ASSERT_TRUE(s.cluster_grid);
    EXPECT_TRUE(s.cluster_grid->accuracy.isApprox(Eigen::MatrixXd::Ones(2, 2)));
  }
  const auto d1 = fresh_dir("report1"), d2 = fresh_dir("report2");
  const auto files = emit_report(report, d1);
  emit_report(report, d2);
  std::set<std::string> names;
  for (const auto& p : files) names.insert(p.filename().string());
  for (int s = 0; s < 8; ++s) {
    EXPECT_TRUE(names.count("cosine_symbol_" + std::to_string(s) + ".csv"));
    EXPECT_TRUE(names.count("compat_clusters_symbol_" + std::to_string(s) + ".csv"));
    EXPECT_TRUE(names.count("compat_symbol_" + std::to_string(s) + ".svg"));
  }
  EXPECT_TRUE(names.count("cosine.svg"));
  EXPECT_TRUE(names.count("analysis.json"));
  for (const auto& p : files) EXPECT_EQ(slurp(p), slurp(d2 / p.filename())) << p;

  const std::string svg = slurp(d1 / "cosine.svg");
  long panels = 0;
  for (auto pos = svg.find("class=\"panel\" data-symbol="); pos != std::string::npos;
       pos = svg.find("class=\"panel\" data-symbol=", pos + 1))
    ++panels;
  EXPECT_EQ(panels, 8);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(ReportTest, MetricsReportFiles) {
  const auto dir = fresh_dir("metrics");
  const std::vector<SeedMetrics> m = {metric(0, Variant::S, 1, 0.3, 4, 2), metric(1, Variant::S, 1, 0.5, 4, 2),
                                      metric(0, Variant::A, 1, 1)};
  emit_metrics_report(m, dir);
  for (const char* name : {"aggregate.csv", "aggregate.txt", "report.txt", "heatmap.csv", "heatmap.svg"})
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------

TEST(DumpIoTest, RepresentationRoundTripAndValidation) {
  const auto dir = fresh_dir("dumps");
  const auto tables = tables_a(4, 4);
  auto dump = codebook_dump(tables, 4, is_ga, 8, 0.1, 2);
  dump.meta.extra["step"] = 1200;
  write_representation_dump(dump, dir / "rep.jsonl");
  const auto back = read_representation_dump(dir / "rep.jsonl", 4, 4);
  EXPECT_EQ(back.meta.dim, 8);
  EXPECT_EQ(back.meta.extra["step"], 1200);
  for (int i = 0; i < 16; ++i) EXPECT_TRUE(back.entries[i].isApprox(dump.entries[i], 1e-12));
  EXPECT_THROW(read_representation_dump(dir / "rep.jsonl", 5, 4), ParseError);

  std::string text = slurp(dir / "rep.jsonl");
  text.erase(text.rfind('\n', text.size() - 2) + 1);  // drop the last record
  spit(dir / "short.jsonl", text);
  EXPECT_THROW(read_representation_dump(dir / "short.jsonl", 4, 4), ParseError);

  spit(dir / "dim.jsonl", R"({"model":"m","variant":"A","seed":0,"dim":2})" "\n"
                          R"({"function":0,"symbol":0,"vector":[1,2,3]})" "\n");
  try {
    read_representation_dump(dir / "dim.jsonl", 1, 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(read_representation_dump(dir / "none.jsonl", 1, 1), IoError);
  fs::remove_all(dir);
}

TEST(DumpIoTest, PredictionsAndMetrics) {
  const auto dir = fresh_dir("preds");
  const auto tables = tables_a(4, 4);
  const auto preds = two_step_predictions(tables, 4, [](auto&, auto&) { return true; });
  write_prediction_dump(preds, dir / "p.jsonl");
  const auto back = read_prediction_dump(dir / "p.jsonl", 4, 4);
  ASSERT_EQ(back.records.size(), preds.records.size());
  EXPECT_EQ(back.records[5].pred, preds.records[5].pred);
  spit(dir / "nometa.jsonl", R"({"f1":0,"f2":1,"input":2,"pred":3})" "\n");
  EXPECT_EQ(read_prediction_dump(dir / "nometa.jsonl", 4, 4).records.size(), 1u);
  spit(dir / "bad.jsonl", R"({"f1":0,"f2":9,"input":2,"pred":3})" "\n");
  EXPECT_THROW(read_prediction_dump(dir / "bad.jsonl", 4, 4), ParseError);

  spit(dir / "m.jsonl",
       R"({"seed":0,"variant":"S","iid":1.0,"ood":0.4,"steps":100,"converged":true,"go_size":8,"shared_symbols":4})"
       "\n"
       R"({"seed":1,"variant":"A","iid":1.0,"ood":0.9,"steps":100,"converged":false})"
       "\n");
  const auto m = read_seed_metrics(dir / "m.jsonl");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].go_size, 8);
  EXPECT_FALSE(m[1].shared_symbols);
  EXPECT_EQ(parse_seed_metrics(nlohmann::json::parse(to_json(m[0]).dump())).ood, 0.4);
  spit(dir / "bad_m.jsonl", R"({"seed":0,"variant":"S","iid":1.5,"ood":0.4,"steps":1,"converged":true})" "\n");
  EXPECT_THROW(read_seed_metrics(dir / "bad_m.jsonl"), ParseError);
  fs::remove_all(dir);
}
