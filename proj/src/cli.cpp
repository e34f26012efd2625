#include "ctlpp/cli.hpp"

#include <cstdlib>
#include <fstream>

#include <CLI11.hpp>

#include "ctlpp/dataset_io.hpp"
#include "ctlpp/errors.hpp"
#include "ctlpp/report.hpp"
#include "ctlpp/verifier.hpp"

namespace ctlpp {

namespace {

struct GenerateArgs {
  std::string config_file;
  std::string variant;
  int symbols = 0, functions = 0, max_depth = 0, go_size = 0, shared = 0;
  long train_size = 0, test_size = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  int jobs = 1;
};

TaskConfig resolve_config(const CLI::App& cmd, const GenerateArgs& a) {
  TaskConfig config;
  if (const char* env = std::getenv("CTLPP_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      config.seed = std::stoull(env, &used);
      if (env[used] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(std::string("CTLPP_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw IoError("cannot open config file " + a.config_file);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + a.config_file + " is not valid JSON: " + e.what());
    }
    config = config_from_json(j, config);
  }
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--variant")) config.variant = parse_variant(a.variant);
  if (given("--symbols")) config.num_symbols = a.symbols;
  if (given("--functions")) config.num_functions = a.functions;
  if (given("--max-depth")) config.max_functions = a.max_depth;
  if (given("--train-size")) config.train_size = a.train_size;
  if (given("--test-size")) config.test_size = a.test_size;
  if (given("--go-size")) config.go_size = a.go_size;
  if (given("--shared-symbols")) config.shared_symbols = a.shared;
  if (given("--seed")) config.seed = a.seed;
  validate(config);
  return config;
}

int run_generate(const CLI::App& cmd, const GenerateArgs& a, std::ostream& out) {
  const TaskConfig config = resolve_config(cmd, a);
  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());

  const Task task = make_task(config);
  nlohmann::ordered_json summary;
  summary["format"] = std::string(kFormatVersion);
  summary["config"] = to_json(config);
  nlohmann::ordered_json splits = nlohmann::ordered_json::object();
  for (Split split : {Split::Train, Split::Iid, Split::Ood}) {
    const Dataset ds = generate_split(task, split, a.jobs);
    const std::string name(to_string(split));
    const auto path = dir / (name + ".jsonl");
    const DatasetManifest written = write_dataset(ds, path);
    if (split == Split::Train) {
      const auto j = written.to_json();
      summary["functions"] = j["functions"];
      summary["overlap"] = j["overlap"];
      summary["coverage_incomplete"] = j["coverage_incomplete"];
    }
    splits[name] = {{"file", name + ".jsonl"},
                    {"size", written.size},
                    {"counts", written.to_json()["counts"]},
                    {"content_hash", written.content_hash},
                    {"warnings", written.warnings}};
    out << "wrote " << path.string() << " (" << written.size << " examples)\n";
    for (const auto& w : written.warnings) out << "  warning: " << w << "\n";
  }
  summary["splits"] = splits;
  std::ofstream manifest(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.json").string());
  manifest << summary.dump(2) << '\n';
  return kExitOk;
}

int run_verify(const std::vector<std::string>& files, bool json, std::ostream& out) {
  bool clean = true;
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  for (const auto& file : files) {
    VerificationReport report;
    try {
      report = verify_file(file);
    } catch (const ParseError& e) {
      report.source = file;
      report.issues.push_back({IssueKind::Balance, e.line(), std::string("unreadable dataset: ") + e.what()});
    }
    clean = clean && report.ok();
    if (json) reports.push_back(report.to_json());
    else out << report.to_text();
  }
  if (json) out << (files.size() == 1 ? reports[0] : reports).dump(2) << '\n';
  return clean ? kExitOk : kExitVerifyFailed;
}

int run_analyze(const std::string& dump_path, const std::string& preds_path, const std::string& manifest_path,
                const std::string& out_dir, double threshold, std::ostream& out) {
  const DatasetReader reader(manifest_path);
  const auto& m = reader.manifest();
  const auto dump = read_representation_dump(dump_path, m.config.num_functions, m.config.num_symbols);
  std::optional<PredictionDump> preds;
  if (!preds_path.empty()) preds = read_prediction_dump(preds_path, m.config.num_functions, m.config.num_symbols);
  const auto report = analyze(dump, preds ? &*preds : nullptr, m.functions, threshold);
  const auto files = emit_report(report, out_dir);
  for (const auto& a : report.symbols)
    out << "symbol " << a.symbol << ": " << num_clusters(a.clusters) << " cluster(s)\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  out << "wrote " << files.size() << " files to " << out_dir << "\n";
  return kExitOk;
}

int run_report(const std::string& metrics_path, const std::string& out_dir, double threshold, bool converged_only,
               std::ostream& out) {
  const auto metrics = read_seed_metrics(metrics_path);
  if (metrics.empty()) throw ParseError("metrics file " + metrics_path + " has no records");
  const auto files = emit_metrics_report(metrics, out_dir, threshold, converged_only);
  out << aggregate_table_text(aggregate_seeds(metrics, threshold, converged_only));
  out << "wrote " << files.size() << " files to " << out_dir << "\n";
  return kExitOk;
}

int run_graph(const std::string& variant, const std::string& format, const std::string& out_file,
              std::ostream& out) {
  const SamplingGraph g = build_graph(parse_variant(variant));
  const std::string text = format == "dot" ? g.to_dot() : g.to_json().dump(2) + "\n";
  if (out_file.empty()) {
    out << text;
    return kExitOk;
  }
  std::ofstream file(out_file, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + out_file + " for writing");
  file << text;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ctlpp: generator, verifier and analyzer for CTL++ systematicity benchmarks", "ctlpp"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate train/iid/ood splits and a manifest");
  generate->add_option("--config", gen.config_file, "JSON file mirroring the task config; flags override it");
  generate->add_option("--variant", gen.variant, "Task variant")->check(CLI::IsMember({"A", "R", "S"}));
  generate->add_option("--symbols", gen.symbols, "Number of symbols (default 8)");
  generate->add_option("--functions", gen.functions, "Number of functions (default 32)");
  generate->add_option("--max-depth", gen.max_depth, "Maximum number of composed functions (default 6)");
  generate->add_option("--train-size", gen.train_size, "Training examples (default 300000)");
  generate->add_option("--test-size", gen.test_size, "Examples per test split (default 1000)");
  generate->add_option("--go-size", gen.go_size, "Variant S: functions in the overlap group Go (default 0)");
  generate->add_option("--shared-symbols", gen.shared, "Variant S: symbols shared by S_a and S_b (default 0)");
  generate->add_option("--seed", gen.seed, "Generation seed (default: $CTLPP_SEED or 0)");
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--jobs", gen.jobs, "Worker threads (default 1)")->check(CLI::PositiveNumber);

  std::vector<std::string> verify_files;
  bool verify_json = false;
  auto* verify = app.add_subcommand("verify", "Check labels, split legality, balance and coverage of dataset files");
  verify->add_option("files", verify_files, "Dataset files")->required();
  verify->add_flag("--json", verify_json, "Machine-readable report");

  std::string dump_path, preds_path, manifest_path, analyze_out;
  double cluster_threshold = 0.8;
  auto* analyze_cmd = app.add_subcommand("analyze", "Cosine matrices, clusters and compatibility grids of a model dump");
  analyze_cmd->add_option("--dump", dump_path, "Representation dump (JSON Lines)")->required();
  analyze_cmd->add_option("--preds", preds_path, "Prediction dump (JSON Lines)");
  analyze_cmd->add_option("--manifest", manifest_path, "Dataset file whose manifest holds the function tables")
      ->required();
  analyze_cmd->add_option("--out", analyze_out, "Output directory")->required();
  analyze_cmd->add_option("--threshold", cluster_threshold, "Cosine threshold joining two functions (default 0.8)");

  std::string metrics_path, report_out;
  double success_threshold = 0.95;
  bool converged_only = false;
  auto* report_cmd = app.add_subcommand("report", "Seed aggregates and variant-S heatmap from seed metrics");
  report_cmd->add_option("--metrics", metrics_path, "Seed metrics (JSON Lines)")->required();
  report_cmd->add_option("--out", report_out, "Output directory")->required();
  report_cmd->add_option("--threshold", success_threshold, "Success threshold on accuracy (default 0.95)");
  report_cmd->add_flag("--converged-only", converged_only, "Ignore seeds flagged as not converged");

  std::string graph_variant, graph_format = "json", graph_out;
  auto* graph = app.add_subcommand("graph", "Export the sampling graph of a variant");
  graph->add_option("--variant", graph_variant, "Task variant")->required()->check(CLI::IsMember({"A", "R", "S"}));
  graph->add_option("--format", graph_format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  graph->add_option("--out", graph_out, "Output file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*generate) return run_generate(*generate, gen, out);
    if (*verify) return run_verify(verify_files, verify_json, out);
    if (*analyze_cmd) return run_analyze(dump_path, preds_path, manifest_path, analyze_out, cluster_threshold, out);
    if (*report_cmd) return run_report(metrics_path, report_out, success_threshold, converged_only, out);
    if (*graph) return run_graph(graph_variant, graph_format, graph_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const SamplingError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ctlpp
