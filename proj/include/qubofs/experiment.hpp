#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qubofs/counterfactual.hpp"
#include "qubofs/dataset.hpp"
#include "qubofs/qubo.hpp"
#include "qubofs/recsys.hpp"
#include "qubofs/solvers.hpp"

namespace qubofs {

// Flat key=value experiment configuration. Every effective value
// (including defaults) serializes back through to_map(), and reports embed
// that map, so a run can be reproduced exactly from its own report.
struct ExperimentConfig {
  // data source: paths take precedence; otherwise a synthetic corpus
  std::string interactions_path;
  std::string features_path;
  SynthParams synth;
  bool synth_seed_set = false;

  double test_fraction = 0.2;
  double validation_fraction = 0.2;

  int n_neighbors = 100;
  MetricSpec metric;

  std::string builder = "pdqubo";  // pdqubo | pdqubo-indiv | miqubo | coqubo | boosting
  std::vector<std::optional<int>> k_list{std::optional<int>{}};  // nullopt = "*"
  std::vector<SolverKind> solvers{SolverKind::sa};

  double penalty_weight = 1.0;
  bool penalty_auto = false;
  int neg_ratio = 1;
  double boost_regularizer = 0.0;

  std::uint64_t seed = 42;
  int repeats = 5;
  int threads = 0;
  std::string out_dir;
  std::string profile_path;  // optional: reuse a precomputed profile

  int num_samples = 2000;
  SaParams sa;
  TabuParams tabu;
  SgdParams sgd;

  static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_map() const;
  void set_key(const std::string& key, const std::string& value);
};

ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& config, const std::string& path);

// Loads CSV data and splits it, or synthesizes the configured corpus.
DatasetBundle load_data(const ExperimentConfig& config);

// Builds the configured coefficient matrix. For the counterfactual
// builders the profile is computed on the validation split (or loaded
// from profile_path after a checksum match) and returned alongside.
struct BuiltQubo {
  SymMatrix q;
  std::optional<CounterfactualProfile> profile;
};
BuiltQubo build_coefficients(const ExperimentConfig& config, const DatasetBundle& bundle);

struct RunRow {
  std::string builder;
  std::string solver;
  std::string k_label;  // decimal or "*"
  int rep = 0;
  std::uint64_t solve_seed = 0;
  std::vector<int> selected;
  double energy = 0.0;
  bool cardinality_ok = true;
  double metric_before = 0.0;
  double metric_after = 0.0;
  double solve_seconds = 0.0;
};

struct RunReport {
  std::map<std::string, std::string> config;
  std::string metric;
  double metric_before = 0.0;  // all features, test split
  std::vector<RunRow> rows;
};

// Full pipeline: data -> base model -> coefficients -> solve per
// (k, solver, rep) -> rebuild the model on the selected features ->
// evaluate on the test split.
RunReport run_pipeline(const ExperimentConfig& config);

void save_run_report(const RunReport& report, const std::string& out_dir);
RunReport load_run_report(const std::string& path);

// (energy, metric) scatter over sampled fixed-cardinality solutions,
// mixing solver samples with uniform random k-subsets; Spearman rank
// correlation is null when undefined.
struct ScatterPoint {
  double energy = 0.0;
  double metric = 0.0;
  std::string bits;
};
struct ScatterResult {
  std::vector<ScatterPoint> points;
  std::optional<double> spearman;
  int k = 0;
  std::string split;
};
ScatterResult cmd_energy_vs_performance(const ExperimentConfig& config, int num_solutions);
void save_scatter(const ScatterResult& r, const std::string& out_dir);

// Stability study over random coefficient matrices: per-scale
// constrained (k = 90% of scale) vs unconstrained energies plus a
// sample-count sweep of min-energy distributions.
struct StabilityScaleResult {
  int scale = 0;
  std::map<std::string, double> unconstrained_energy;
  std::map<std::string, double> constrained_energy;
  std::vector<StabilityReport> per_sample_count;
};
std::vector<StabilityScaleResult> cmd_stability(const ExperimentConfig& config,
                                                const std::vector<int>& scales,
                                                const std::vector<int>& sample_counts,
                                                int outer_reps);
void save_stability(const std::vector<StabilityScaleResult>& results, const std::string& out_dir);

// Sparsity-difficulty sweep: drop a share of nonzero feature values,
// rerun selection, report the relative improvement of the selected
// subset over all features.
struct DifficultyRow {
  double fraction = 0.0;
  std::vector<double> improvements;  // one per repetition; relative, NaN when undefined
  double mean = 0.0;
  double stddev = 0.0;
};
std::vector<DifficultyRow> cmd_difficulty(const ExperimentConfig& config,
                                          const std::vector<double>& drop_fractions, int reps);
void save_difficulty(const std::vector<DifficultyRow>& rows, const std::string& out_dir);

// Wall-time of each classical solver on random matrices per scale.
struct TimingRow {
  int scale = 0;
  std::map<std::string, std::vector<double>> seconds;
  std::map<std::string, std::uint64_t> evaluations;
};
std::vector<TimingRow> cmd_timing(const ExperimentConfig& config, const std::vector<int>& scales,
                                  int reps);
void save_timing(const std::vector<TimingRow>& rows, const std::string& out_dir);

// shared helpers -------------------------------------------------------

// random ensemble used by the stability and timing studies
SymMatrix random_coefficient_matrix(int n, std::uint64_t seed);

// zero a share of nonzero feature values, uniformly at random
ItemFeatureMatrix drop_feature_values(const ItemFeatureMatrix& features, double fraction,
                                      std::uint64_t seed);

// Spearman rank correlation with average ranks for ties; null when either
// side is constant or fewer than 2 points are given.
std::optional<double> spearman_correlation(const std::vector<double>& a,
                                           const std::vector<double>& b);

InteractionMatrix union_interactions(const InteractionMatrix& a, const InteractionMatrix& b);

}  // namespace qubofs
