#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qubofs/experiment.hpp"
#include "qubofs/qubo.hpp"

namespace {

using namespace qubofs;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string builder;
  std::string solvers;
  std::string k_list;
  std::string seed;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config file (key = value lines)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "global seed");
  cmd->add_option("--solver", flags.solvers, "comma-separated solver list (sa,sgd,tabu,exhaustive,external-stub)");
  cmd->add_option("--builder", flags.builder, "coefficient builder (pdqubo,pdqubo-indiv,miqubo,coqubo,boosting)");
  cmd->add_option("--k", flags.k_list, "comma-separated cardinality list; * lets the solver decide");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig config;
  if (!flags.config_path.empty()) config = load_config_file(flags.config_path);
  if (!flags.seed.empty()) config.set_key("seed", flags.seed);
  if (!flags.builder.empty()) config.set_key("builder", flags.builder);
  if (!flags.solvers.empty()) config.set_key("solvers", flags.solvers);
  if (!flags.k_list.empty()) config.set_key("k", flags.k_list);
  if (!flags.out_dir.empty()) config.set_key("out", flags.out_dir);
  // re-run the cross-field checks after overrides
  return ExperimentConfig::from_map(config.to_map());
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) return;
    try {
      out.push_back(std::stoi(cur));
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad integer \"" + cur + "\"");
    }
    cur.clear();
  };
  for (char c : text) {
    if (c == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      cur.push_back(c);
  }
  flush();
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) return;
    try {
      out.push_back(std::stod(cur));
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad number \"" + cur + "\"");
    }
    cur.clear();
  };
  for (char c : text) {
    if (c == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      cur.push_back(c);
  }
  flush();
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QUBO-based feature selection for recommender models"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* pipeline = app.add_subcommand(
      "pipeline", "data -> coefficients -> solve -> retrain with selection -> report");
  add_common_flags(pipeline, flags);

  auto* evp = app.add_subcommand("energy-vs-perf",
                                 "scatter of solution energy vs retrained metric");
  add_common_flags(evp, flags);
  int num_solutions = 200;
  evp->add_option("--num-solutions", num_solutions, "number of sampled fixed-k solutions");

  auto* stability = app.add_subcommand("stability", "energy distributions on random matrices");
  add_common_flags(stability, flags);
  std::string scales_text = "10,30,50,100,150";
  std::string counts_text = "1,10,100,500,2000";
  int outer_reps = 20;
  stability->add_option("--scales", scales_text, "problem sizes");
  stability->add_option("--sample-counts", counts_text, "sample counts for the min-energy sweep");
  stability->add_option("--reps", outer_reps, "outer repetitions per sample count");

  auto* difficulty = app.add_subcommand("difficulty",
                                        "selection improvement vs feature-value sparsity");
  add_common_flags(difficulty, flags);
  std::string drops_text = "0.2,0.4,0.6";
  int diff_reps = 3;
  difficulty->add_option("--drop", drops_text, "feature-value drop fractions");
  difficulty->add_option("--reps", diff_reps, "repetitions per fraction");

  auto* timing = app.add_subcommand("timing", "solver wall time vs problem scale");
  add_common_flags(timing, flags);
  std::string timing_scales_text = "10,30,50";
  int timing_reps = 3;
  timing->add_option("--scales", timing_scales_text, "problem sizes");
  timing->add_option("--reps", timing_reps, "repetitions per cell");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common_flags(synth, flags);
  SynthParams synth_params;
  synth->add_option("--users", synth_params.num_users, "number of users");
  synth->add_option("--items", synth_params.num_items, "number of items");
  synth->add_option("--features", synth_params.num_features, "number of features");
  synth->add_option("--informative", synth_params.num_informative, "planted informative features");
  synth->add_option("--sparsity", synth_params.sparsity, "target feature sparsity");

  auto* validate_q = app.add_subcommand("validate-q", "check a coefficient matrix file");
  std::string q_path;
  validate_q->add_option("path", q_path, "q_matrix.json file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand(pipeline)) {
      const ExperimentConfig config = resolve_config(flags);
      const RunReport report = run_pipeline(config);
      std::cout << "metric_before " << report.metric_before << "\n";
      for (const RunRow& row : report.rows)
        std::cout << row.builder << " k=" << row.k_label << " " << row.solver << " rep=" << row.rep
                  << " Y=" << row.energy << " " << report.metric << "=" << row.metric_after
                  << (row.cardinality_ok ? "" : " CARDINALITY-VIOLATED") << "\n";
      if (config.out_dir.empty()) log_warn("no --out directory given; report not written");
    } else if (app.got_subcommand(evp)) {
      const ExperimentConfig config = resolve_config(flags);
      const ScatterResult result = cmd_energy_vs_performance(config, num_solutions);
      if (!config.out_dir.empty()) save_scatter(result, config.out_dir);
      std::cout << "points " << result.points.size() << "\n";
      if (result.spearman)
        std::cout << "spearman " << *result.spearman << "\n";
      else
        std::cout << "spearman null\n";
    } else if (app.got_subcommand(stability)) {
      const ExperimentConfig config = resolve_config(flags);
      const auto results = cmd_stability(config, parse_int_list(scales_text, "--scales"),
                                         parse_int_list(counts_text, "--sample-counts"), outer_reps);
      if (!config.out_dir.empty()) save_stability(results, config.out_dir);
      for (const auto& r : results) {
        std::cout << "scale " << r.scale;
        for (const auto& [name, e] : r.unconstrained_energy)
          std::cout << " " << name << ": Y*=" << e << " Y(k=90%)=" << r.constrained_energy.at(name);
        std::cout << "\n";
      }
    } else if (app.got_subcommand(difficulty)) {
      const ExperimentConfig config = resolve_config(flags);
      const auto rows =
          cmd_difficulty(config, parse_double_list(drops_text, "--drop"), diff_reps);
      if (!config.out_dir.empty()) save_difficulty(rows, config.out_dir);
      for (const auto& r : rows)
        std::cout << "drop " << r.fraction << " improvement " << r.mean << " +- " << r.stddev
                  << "\n";
    } else if (app.got_subcommand(timing)) {
      const ExperimentConfig config = resolve_config(flags);
      const auto rows = cmd_timing(config, parse_int_list(timing_scales_text, "--scales"), timing_reps);
      if (!config.out_dir.empty()) save_timing(rows, config.out_dir);
      for (const auto& r : rows) {
        std::cout << "scale " << r.scale;
        for (const auto& [name, v] : r.seconds) {
          double mean = 0.0;
          for (double t : v) mean += t;
          std::cout << " " << name << "=" << mean / static_cast<double>(v.size()) << "s";
        }
        std::cout << "\n";
      }
    } else if (app.got_subcommand(synth)) {
      const ExperimentConfig config = resolve_config(flags);
      if (config.out_dir.empty()) throw ConfigError("synth requires --out");
      SynthParams params = synth_params;
      params.seed = config.seed;
      params.test_fraction = config.test_fraction;
      params.validation_fraction = config.validation_fraction;
      const DatasetBundle bundle = synthesize_corpus(params);
      std::filesystem::create_directories(config.out_dir);
      const auto dir = std::filesystem::path(config.out_dir);
      write_interactions_csv(union_interactions(union_interactions(bundle.train, bundle.validation),
                                                bundle.test),
                             (dir / "interactions.csv").string());
      write_features_csv(bundle.features, (dir / "features.csv").string());
      write_manifest_json(*bundle.manifest, (dir / "manifest.json").string());
      std::cout << "corpus written to " << config.out_dir << "\n";
    } else if (app.got_subcommand(validate_q)) {
      const SymMatrix q = load_matrix_json(q_path);
      const QuboValidationReport report = validate(q);
      std::cout << validation_report_json(report) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
