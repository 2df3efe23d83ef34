#include "qubofs/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qubofs {

namespace {

namespace fs = std::filesystem;

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key " + key + ": expected a boolean, got \"" + value + "\"");
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing garbage");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an integer, got \"" + value + "\"");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing garbage");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an unsigned integer, got \"" + value + "\"");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing garbage");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got \"" + value + "\"");
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("stage ") + name + ": " + e.what());
  } catch (const TransportError& e) {
    throw TransportError(std::string("stage ") + name + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string("stage ") + name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string("stage ") + name + ": " + e.what());
  } catch (const SolverError& e) {
    throw SolverError(std::string("stage ") + name + ": " + e.what());
  }
}

std::string k_label_of(const std::optional<int>& k) {
  return k ? std::to_string(*k) : std::string("*");
}

double resolve_penalty_weight(const ExperimentConfig& config, const SymMatrix& q) {
  if (!config.penalty_auto) return config.penalty_weight;
  double max_abs = 0.0;
  for (double v : q.values()) max_abs = std::max(max_abs, std::abs(v));
  const double w = std::max(1.0, max_abs * q.size());
  log_info("auto penalty weight: " + format_real(w));
  return w;
}

std::string selection_key(const std::vector<int>& selected) {
  std::string key;
  for (int s : selected) {
    key += std::to_string(s);
    key += ',';
  }
  return key;
}

// metric of the restricted model on the test split; profiles come from
// train+validation so the final model sees all non-test interactions
double evaluate_selection(const DatasetBundle& bundle, const InteractionMatrix& trainval,
                          const std::vector<int>& selected, const ExperimentConfig& config) {
  ItemKnnModel model = train_item_knn(bundle.features.restricted_to(selected), config.n_neighbors);
  return evaluate(model, trainval, bundle.test, config.metric).metric_value;
}

SolverConfig solver_config_for(const ExperimentConfig& config, SolverKind kind,
                               std::uint64_t seed) {
  SolverConfig cfg;
  cfg.kind = kind;
  cfg.seed = seed;
  cfg.num_samples = config.num_samples;
  cfg.sa = config.sa;
  cfg.tabu = config.tabu;
  cfg.sgd = config.sgd;
  return cfg;
}

}  // namespace

void ExperimentConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "data.interactions") interactions_path = value;
  else if (key == "data.features") features_path = value;
  else if (key == "synth.users") synth.num_users = parse_int(key, value);
  else if (key == "synth.items") synth.num_items = parse_int(key, value);
  else if (key == "synth.features") synth.num_features = parse_int(key, value);
  else if (key == "synth.informative") synth.num_informative = parse_int(key, value);
  else if (key == "synth.sparsity") synth.sparsity = parse_double(key, value);
  else if (key == "synth.seed") {
    synth.seed = parse_u64(key, value);
    synth_seed_set = true;
  } else if (key == "split.test_fraction") test_fraction = parse_double(key, value);
  else if (key == "split.validation_fraction") validation_fraction = parse_double(key, value);
  else if (key == "model.n_neighbors") n_neighbors = parse_int(key, value);
  else if (key == "metric.kind") metric = metric_from_name(value, metric.cutoff);
  else if (key == "metric.cutoff") metric.cutoff = parse_int(key, value);
  else if (key == "builder") {
    if (value != "pdqubo" && value != "pdqubo-indiv" && value != "miqubo" && value != "coqubo" &&
        value != "boosting")
      throw ConfigError("unknown builder: " + value);
    builder = value;
  } else if (key == "k") {
    k_list.clear();
    for (const std::string& tok : split_list(value)) {
      if (tok == "*")
        k_list.push_back(std::nullopt);
      else
        k_list.push_back(parse_int(key, tok));
    }
    if (k_list.empty()) throw ConfigError("config key k: empty list");
  } else if (key == "solvers") {
    solvers.clear();
    for (const std::string& tok : split_list(value)) solvers.push_back(solver_from_name(tok));
    if (solvers.empty()) throw ConfigError("config key solvers: empty list");
  } else if (key == "penalty.weight") penalty_weight = parse_double(key, value);
  else if (key == "penalty.auto") penalty_auto = parse_bool(key, value);
  else if (key == "neg.ratio") neg_ratio = parse_int(key, value);
  else if (key == "boost.regularizer") boost_regularizer = parse_double(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "repeats") repeats = parse_int(key, value);
  else if (key == "threads") threads = parse_int(key, value);
  else if (key == "out") out_dir = value;
  else if (key == "profile.path") profile_path = value;
  else if (key == "num_samples") num_samples = parse_int(key, value);
  else if (key == "sa.initial_temp") sa.initial_temp = parse_double(key, value);
  else if (key == "sa.cooling") sa.cooling = parse_double(key, value);
  else if (key == "sa.steps_per_temp") sa.steps_per_temp = parse_int(key, value);
  else if (key == "sa.final_temp") sa.final_temp = parse_double(key, value);
  else if (key == "sa.swap_moves") sa.swap_moves = parse_bool(key, value);
  else if (key == "tabu.tenure") tabu.tenure = parse_int(key, value);
  else if (key == "tabu.max_iters") tabu.max_iters = parse_int(key, value);
  else if (key == "sgd.learning_rate") sgd.learning_rate = parse_double(key, value);
  else if (key == "sgd.iters") sgd.iters = parse_int(key, value);
  else if (key == "sgd.restarts") sgd.restarts = parse_int(key, value);
  else throw ConfigError("unknown config key: " + key);
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
  ExperimentConfig config;
  for (const auto& [key, value] : kv) config.set_key(key, value);
  if (!config.synth_seed_set) {
    config.synth.seed = config.seed;
    config.synth_seed_set = true;
  }
  config.synth.test_fraction = config.test_fraction;
  config.synth.validation_fraction = config.validation_fraction;
  if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (config.neg_ratio < 1) throw ConfigError("neg.ratio must be >= 1");
  return config;
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> kv;
  kv["data.interactions"] = interactions_path;
  kv["data.features"] = features_path;
  kv["synth.users"] = std::to_string(synth.num_users);
  kv["synth.items"] = std::to_string(synth.num_items);
  kv["synth.features"] = std::to_string(synth.num_features);
  kv["synth.informative"] = std::to_string(synth.num_informative);
  kv["synth.sparsity"] = format_real(synth.sparsity);
  kv["synth.seed"] = std::to_string(synth_seed_set ? synth.seed : seed);
  kv["split.test_fraction"] = format_real(test_fraction);
  kv["split.validation_fraction"] = format_real(validation_fraction);
  kv["model.n_neighbors"] = std::to_string(n_neighbors);
  kv["metric.kind"] = metric.kind == MetricSpec::Kind::ndcg ? "ndcg" : "recall";
  kv["metric.cutoff"] = std::to_string(metric.cutoff);
  kv["builder"] = builder;
  {
    std::string ks;
    for (std::size_t i = 0; i < k_list.size(); ++i) {
      if (i) ks += ",";
      ks += k_label_of(k_list[i]);
    }
    kv["k"] = ks;
  }
  {
    std::string ss;
    for (std::size_t i = 0; i < solvers.size(); ++i) {
      if (i) ss += ",";
      ss += solver_name(solvers[i]);
    }
    kv["solvers"] = ss;
  }
  kv["penalty.weight"] = format_real(penalty_weight);
  kv["penalty.auto"] = penalty_auto ? "true" : "false";
  kv["neg.ratio"] = std::to_string(neg_ratio);
  kv["boost.regularizer"] = format_real(boost_regularizer);
  kv["seed"] = std::to_string(seed);
  kv["repeats"] = std::to_string(repeats);
  kv["threads"] = std::to_string(threads);
  kv["out"] = out_dir;
  kv["profile.path"] = profile_path;
  kv["num_samples"] = std::to_string(num_samples);
  kv["sa.initial_temp"] = format_real(sa.initial_temp);
  kv["sa.cooling"] = format_real(sa.cooling);
  kv["sa.steps_per_temp"] = std::to_string(sa.steps_per_temp);
  kv["sa.final_temp"] = format_real(sa.final_temp);
  kv["sa.swap_moves"] = sa.swap_moves ? "true" : "false";
  kv["tabu.tenure"] = std::to_string(tabu.tenure);
  kv["tabu.max_iters"] = std::to_string(tabu.max_iters);
  kv["sgd.learning_rate"] = format_real(sgd.learning_rate);
  kv["sgd.iters"] = std::to_string(sgd.iters);
  kv["sgd.restarts"] = std::to_string(sgd.restarts);
  return kv;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config parse error at line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError("config parse error at line " + std::to_string(line_no));
    kv[key] = value;
  }
  return ExperimentConfig::from_map(kv);
}

void save_config_file(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& [key, value] : config.to_map()) out << key << " = " << value << "\n";
}

DatasetBundle load_data(const ExperimentConfig& config) {
  if (!config.interactions_path.empty()) {
    if (config.features_path.empty())
      throw ConfigError("data.features is required when data.interactions is set");
    InteractionsLoad interactions = load_interactions(config.interactions_path);
    FeaturesLoad features = load_features(config.features_path, interactions.items);
    SplitResult splits = split(interactions.matrix,
                               SplitSpec{config.test_fraction, config.validation_fraction,
                                         derive_seed(config.seed, "split")});
    DatasetBundle bundle;
    bundle.train = std::move(splits.train);
    bundle.validation = std::move(splits.validation);
    bundle.test = std::move(splits.test);
    bundle.features = std::move(features.matrix);
    return bundle;
  }
  SynthParams params = config.synth;
  params.test_fraction = config.test_fraction;
  params.validation_fraction = config.validation_fraction;
  if (!config.synth_seed_set) params.seed = config.seed;
  return synthesize_corpus(params);
}

BuiltQubo build_coefficients(const ExperimentConfig& config, const DatasetBundle& bundle) {
  BuiltQubo built;
  if (config.builder == "pdqubo" || config.builder == "pdqubo-indiv") {
    ItemKnnMaskedEvaluator evaluator(bundle.features, bundle.train, bundle.validation,
                                     config.metric, config.n_neighbors, Split::validation);
    CounterfactualProfile profile;
    if (!config.profile_path.empty()) {
      if (!fs::exists(config.profile_path))
        throw ConfigError("profile.path does not exist: " + config.profile_path);
      profile = load_profile(config.profile_path);
      if (profile.evaluation_split == Split::test)
        throw ConfigError("refusing a test-tagged profile for feature selection");
      if (profile.input_checksum != evaluator.input_fingerprint())
        throw DataError("profile " + config.profile_path + " does not match the current inputs");
    } else {
      ProfileOptions options;
      options.mode = config.builder == "pdqubo" ? PairMode::comb : PairMode::indiv;
      options.num_threads = config.threads;
      if (!config.out_dir.empty())
        options.checkpoint_path = (fs::path(config.out_dir) / "profile_checkpoint.json").string();
      profile = compute_profile(evaluator, options);
    }
    built.q = build_pdqubo(profile);
    built.profile = std::move(profile);
  } else {
    const std::vector<LabeledSample> labels =
        negative_sample(bundle.train, config.neg_ratio, derive_seed(config.seed, "negsample"));
    if (config.builder == "miqubo") {
      built.q = build_miqubo(bundle.features, labels);
    } else if (config.builder == "coqubo") {
      built.q = build_coqubo(bundle.features, labels);
    } else if (config.builder == "boosting") {
      const auto predictions = single_feature_sign_predictions(bundle.features, bundle.train,
                                                               labels, config.n_neighbors);
      built.q = build_boosting(predictions, labels, config.boost_regularizer);
    } else {
      throw ConfigError("unknown builder: " + config.builder);
    }
  }
  validate(built.q);
  return built;
}

RunReport run_pipeline(const ExperimentConfig& config) {
  RunReport report;
  report.config = config.to_map();
  report.metric = metric_name(config.metric);

  const bool writing = !config.out_dir.empty();
  if (writing) {
    fs::create_directories(config.out_dir);
    save_config_file(config, (fs::path(config.out_dir) / "resolved.cfg").string());
  }

  DatasetBundle bundle = run_stage("data", [&] { return load_data(config); });
  for (const auto& k : config.k_list)
    if (k && (*k < 0 || *k > bundle.features.num_features()))
      throw ConfigError("k=" + std::to_string(*k) + " exceeds the number of features " +
                        std::to_string(bundle.features.num_features()));

  const InteractionMatrix trainval = union_interactions(bundle.train, bundle.validation);
  report.metric_before = run_stage("baseline", [&] {
    ItemKnnModel full = train_item_knn(bundle.features, config.n_neighbors);
    return evaluate(full, trainval, bundle.test, config.metric).metric_value;
  });

  BuiltQubo built = run_stage("build-q", [&] { return build_coefficients(config, bundle); });
  if (writing) {
    save_matrix_json(built.q, (fs::path(config.out_dir) / "q_matrix.json").string());
    save_matrix_triplets(built.q, (fs::path(config.out_dir) / "q_triplets.txt").string());
    if (built.profile)
      save_profile(*built.profile, (fs::path(config.out_dir) / "profile.json").string());
  }

  std::map<std::string, double> metric_cache;
  run_stage("solve", [&] {
    for (const auto& k : config.k_list) {
      QuboProblem problem;
      problem.q = built.q;
      problem.k = k;
      problem.penalty_weight = k ? resolve_penalty_weight(config, built.q) : 1.0;
      for (SolverKind kind : config.solvers) {
        for (int rep = 0; rep < config.repeats; ++rep) {
          const std::string tag = "solve/" + config.builder + "/" + solver_name(kind) + "/" +
                                  k_label_of(k) + "/" + std::to_string(rep);
          const std::uint64_t solve_seed = derive_seed(config.seed, tag);
          const SolveResult res = solve(problem, solver_config_for(config, kind, solve_seed));

          RunRow row;
          row.builder = config.builder;
          row.solver = solver_name(kind);
          row.k_label = k_label_of(k);
          row.rep = rep;
          row.solve_seed = solve_seed;
          row.selected = ones_of(res.best);
          row.energy = res.best_energy;
          row.cardinality_ok = !k || static_cast<int>(row.selected.size()) == *k;
          if (!row.cardinality_ok)
            log_warn("cardinality violated: builder=" + row.builder + " solver=" + row.solver +
                     " k=" + row.k_label + " got " + std::to_string(row.selected.size()));
          row.metric_before = report.metric_before;
          row.solve_seconds = res.wall_time_s;

          const std::string key = selection_key(row.selected);
          auto it = metric_cache.find(key);
          if (it == metric_cache.end())
            it = metric_cache.emplace(key, evaluate_selection(bundle, trainval, row.selected, config)).first;
          row.metric_after = it->second;
          report.rows.push_back(std::move(row));
        }
      }
    }
    return 0;
  });

  if (writing) save_run_report(report, config.out_dir);
  return report;
}

void save_run_report(const RunReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  nlohmann::json j;
  j["config"] = report.config;
  j["metric"] = report.metric;
  j["metric_before"] = report.metric_before;
  nlohmann::json rows = nlohmann::json::array();
  for (const RunRow& r : report.rows) {
    nlohmann::json row;
    row["builder"] = r.builder;
    row["solver"] = r.solver;
    row["k"] = r.k_label;
    row["rep"] = r.rep;
    row["solve_seed"] = r.solve_seed;
    row["selected"] = r.selected;
    row["energy"] = r.energy;
    row["cardinality_ok"] = r.cardinality_ok;
    row["metric_before"] = r.metric_before;
    row["metric_after"] = r.metric_after;
    row["solve_seconds"] = r.solve_seconds;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  std::ofstream out(fs::path(out_dir) / "report.json");
  if (!out) throw DataError("cannot write report.json in " + out_dir);
  out << j.dump(2) << "\n";

  // wide table: one row per (builder, k), one column per solver, mean over reps
  std::vector<std::string> solver_order;
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<double>>> cells;
  for (const RunRow& r : report.rows) {
    if (std::find(solver_order.begin(), solver_order.end(), r.solver) == solver_order.end())
      solver_order.push_back(r.solver);
    cells[{r.builder, r.k_label}][r.solver].push_back(r.metric_after);
  }
  std::ofstream csv(fs::path(out_dir) / "table.csv");
  if (!csv) throw DataError("cannot write table.csv in " + out_dir);
  csv << "builder,k";
  for (const auto& s : solver_order) csv << "," << s;
  csv << "\n";
  csv << "all-features,-";
  for (std::size_t i = 0; i < solver_order.size(); ++i) csv << "," << report.metric_before;
  csv << "\n";
  for (const auto& [key, per_solver] : cells) {
    csv << key.first << "," << key.second;
    for (const auto& s : solver_order) {
      auto it = per_solver.find(s);
      if (it == per_solver.end()) {
        csv << ",";
        continue;
      }
      const double mean = std::accumulate(it->second.begin(), it->second.end(), 0.0) /
                          static_cast<double>(it->second.size());
      csv << "," << mean;
    }
    csv << "\n";
  }
}

RunReport load_run_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("report parse error: " + std::string(e.what()));
  }
  RunReport report;
  report.config = j.at("config").get<std::map<std::string, std::string>>();
  report.metric = j.at("metric").get<std::string>();
  report.metric_before = j.at("metric_before").get<double>();
  for (const auto& row : j.at("rows")) {
    RunRow r;
    r.builder = row.at("builder").get<std::string>();
    r.solver = row.at("solver").get<std::string>();
    r.k_label = row.at("k").get<std::string>();
    r.rep = row.at("rep").get<int>();
    r.solve_seed = row.at("solve_seed").get<std::uint64_t>();
    r.selected = row.at("selected").get<std::vector<int>>();
    r.energy = row.at("energy").get<double>();
    r.cardinality_ok = row.at("cardinality_ok").get<bool>();
    r.metric_before = row.at("metric_before").get<double>();
    r.metric_after = row.at("metric_after").get<double>();
    r.solve_seconds = row.at("solve_seconds").get<double>();
    report.rows.push_back(std::move(r));
  }
  return report;
}

ScatterResult cmd_energy_vs_performance(const ExperimentConfig& config, int num_solutions) {
  DatasetBundle bundle = run_stage("data", [&] { return load_data(config); });
  std::optional<int> k_fixed;
  for (const auto& k : config.k_list)
    if (k) {
      k_fixed = k;
      break;
    }
  if (!k_fixed) throw ConfigError("energy-vs-perf needs a fixed k in the k list");
  if (num_solutions < 1) throw ConfigError("num_solutions must be >= 1");

  ItemKnnMaskedEvaluator evaluator(bundle.features, bundle.train, bundle.validation, config.metric,
                                   config.n_neighbors, Split::validation);
  BuiltQubo built = run_stage("build-q", [&] { return build_coefficients(config, bundle); });
  QuboProblem problem;
  problem.q = built.q;
  problem.k = k_fixed;
  problem.penalty_weight = resolve_penalty_weight(config, built.q);

  const int n = built.q.size();
  std::set<std::string> seen;
  std::vector<BitVector> solutions;
  auto admit = [&](const BitVector& bits) {
    if (popcount(bits) != *k_fixed) return;
    std::string key(bits.begin(), bits.end());
    if (seen.insert(key).second) solutions.push_back(bits);
  };

  // half solver samples, half uniform random k-subsets
  SolverKind kind = config.solvers.empty() ? SolverKind::sa : config.solvers.front();
  if (kind == SolverKind::exhaustive || kind == SolverKind::external_stub) kind = SolverKind::sa;
  SolverConfig scfg = solver_config_for(config, kind, derive_seed(config.seed, "evp-solver"));
  scfg.record_samples = true;
  scfg.num_samples = std::max(1, num_solutions / 2);
  scfg.sgd.restarts = scfg.num_samples;
  const SolveResult res = solve(problem, scfg);
  for (const auto& [e, bits] : res.samples) {
    admit(bits);
    if (static_cast<int>(solutions.size()) >= num_solutions) break;
  }

  std::mt19937_64 rng(derive_seed(config.seed, "evp-random"));
  long attempts = 0;
  const long max_attempts = 200L * std::max(1, num_solutions);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  while (static_cast<int>(solutions.size()) < num_solutions && attempts < max_attempts) {
    ++attempts;
    std::shuffle(idx.begin(), idx.end(), rng);
    BitVector bits(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < std::min(*k_fixed, n); ++i) bits[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
    admit(bits);
  }
  if (static_cast<int>(solutions.size()) < num_solutions)
    log_warn("energy-vs-perf: only " + std::to_string(solutions.size()) + " distinct solutions of " +
             std::to_string(num_solutions) + " requested");

  ScatterResult result;
  result.k = *k_fixed;
  result.split = split_name(evaluator.evaluation_split());
  std::vector<double> energies, metrics;
  for (const BitVector& bits : solutions) {
    ScatterPoint p;
    p.energy = energy(problem, bits);
    p.metric = evaluator.metric_with_mask(zeros_of(bits));
    p.bits.assign(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) p.bits[i] = '1';
    energies.push_back(p.energy);
    metrics.push_back(p.metric);
    result.points.push_back(std::move(p));
  }
  result.spearman = spearman_correlation(energies, metrics);
  if (!result.spearman)
    log_warn("energy-vs-perf: correlation undefined for " + std::to_string(solutions.size()) +
             " point(s)");
  return result;
}

void save_scatter(const ScatterResult& r, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream csv(fs::path(out_dir) / "energy_vs_performance.csv");
    if (!csv) throw DataError("cannot write energy_vs_performance.csv");
    csv.precision(17);
    csv << "energy,metric,bits\n";
    for (const ScatterPoint& p : r.points)
      csv << p.energy << "," << p.metric << "," << p.bits << "\n";
  }
  nlohmann::json j;
  j["num_points"] = r.points.size();
  j["k"] = r.k;
  j["split"] = r.split;
  if (r.spearman)
    j["spearman"] = *r.spearman;
  else
    j["spearman"] = nullptr;
  std::ofstream out(fs::path(out_dir) / "energy_vs_performance.json");
  out << j.dump(2) << "\n";
}

std::vector<StabilityScaleResult> cmd_stability(const ExperimentConfig& config,
                                                const std::vector<int>& scales,
                                                const std::vector<int>& sample_counts,
                                                int outer_reps) {
  if (scales.empty()) throw ConfigError("stability: no scales given");
  std::vector<StabilityScaleResult> results;
  for (int n : scales) {
    if (n < 1) throw ConfigError("stability: scales must be positive");
    StabilityScaleResult r;
    r.scale = n;
    const SymMatrix q = random_coefficient_matrix(n, derive_seed(config.seed, 0x57ab0000ULL + static_cast<std::uint64_t>(n)));
    QuboProblem unconstrained{q, std::nullopt, 1.0};
    QuboProblem constrained{q, static_cast<int>(std::llround(0.9 * n)), resolve_penalty_weight(config, q)};

    for (SolverKind kind : config.solvers) {
      if (kind == SolverKind::exhaustive && n > 24) continue;
      const std::string name = solver_name(kind);
      const SolveResult uc = solve(unconstrained,
                                   solver_config_for(config, kind, derive_seed(config.seed, "stab-uc/" + name + "/" + std::to_string(n))));
      const SolveResult c = solve(constrained,
                                  solver_config_for(config, kind, derive_seed(config.seed, "stab-c/" + name + "/" + std::to_string(n))));
      // the constrained solution is itself feasible for the unconstrained
      // problem; admitting it keeps the subset relation on every run
      r.unconstrained_energy[name] = std::min(uc.best_energy, energy(unconstrained, c.best));
      r.constrained_energy[name] = c.best_energy;
    }

    if (!sample_counts.empty()) {
      SolverKind kind = config.solvers.empty() ? SolverKind::sa : config.solvers.front();
      if (kind == SolverKind::exhaustive) kind = SolverKind::sa;
      SolverConfig cfg = solver_config_for(config, kind, derive_seed(config.seed, 0x57ab5cULL + static_cast<std::uint64_t>(n)));
      r.per_sample_count = sample_stability(unconstrained, cfg, sample_counts, outer_reps);
    }
    results.push_back(std::move(r));
  }
  return results;
}

void save_stability(const std::vector<StabilityScaleResult>& results, const std::string& out_dir) {
  fs::create_directories(out_dir);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json row;
    row["scale"] = r.scale;
    row["unconstrained_energy"] = r.unconstrained_energy;
    row["constrained_energy"] = r.constrained_energy;
    nlohmann::json sweeps = nlohmann::json::array();
    for (const StabilityReport& rep : r.per_sample_count) {
      nlohmann::json s;
      s["sample_count"] = rep.sample_count;
      s["min"] = rep.min;
      s["mean"] = rep.mean;
      s["variance"] = rep.variance;
      sweeps.push_back(std::move(s));
    }
    row["sample_counts"] = std::move(sweeps);
    j.push_back(std::move(row));

    std::ofstream csv(fs::path(out_dir) / ("stability_scale_" + std::to_string(r.scale) + ".csv"));
    if (!csv) throw DataError("cannot write stability histogram for scale " + std::to_string(r.scale));
    csv.precision(17);
    csv << "sample_count,bin_lo,bin_hi,count\n";
    for (const StabilityReport& rep : r.per_sample_count)
      for (std::size_t b = 0; b + 1 < rep.histogram_edges.size(); ++b)
        csv << rep.sample_count << "," << rep.histogram_edges[b] << "," << rep.histogram_edges[b + 1]
            << "," << rep.histogram_counts[b] << "\n";
  }
  std::ofstream out(fs::path(out_dir) / "stability.json");
  out << j.dump(2) << "\n";
}

std::vector<DifficultyRow> cmd_difficulty(const ExperimentConfig& config,
                                          const std::vector<double>& drop_fractions, int reps) {
  if (reps < 1) throw ConfigError("difficulty: reps must be >= 1");
  for (double f : drop_fractions)
    if (f < 0.0 || f >= 1.0) throw ConfigError("difficulty: drop fractions must lie in [0,1)");
  const DatasetBundle base = run_stage("data", [&] { return load_data(config); });
  const std::optional<int> k = config.k_list.front();
  const SolverKind kind = config.solvers.front();

  std::vector<DifficultyRow> rows;
  for (std::size_t fi = 0; fi < drop_fractions.size(); ++fi) {
    DifficultyRow row;
    row.fraction = drop_fractions[fi];
    for (int rep = 0; rep < reps; ++rep) {
      DatasetBundle bundle = base;
      bundle.features = drop_feature_values(
          base.features, row.fraction,
          derive_seed(config.seed, "drop/" + std::to_string(fi) + "/" + std::to_string(rep)));

      const InteractionMatrix trainval = union_interactions(bundle.train, bundle.validation);
      ItemKnnModel full = train_item_knn(bundle.features, config.n_neighbors);
      const double before = evaluate(full, trainval, bundle.test, config.metric).metric_value;

      ExperimentConfig cfg = config;
      cfg.out_dir.clear();
      BuiltQubo built = build_coefficients(cfg, bundle);
      QuboProblem problem{built.q, k, k ? resolve_penalty_weight(config, built.q) : 1.0};
      const std::string tag = "solve/" + config.builder + "/" + solver_name(kind) + "/" +
                              k_label_of(k) + "/" + std::to_string(rep);
      const SolveResult res = solve(problem, solver_config_for(config, kind, derive_seed(config.seed, tag)));
      const double after = evaluate_selection(bundle, trainval, ones_of(res.best), config);
      row.improvements.push_back(before > 0.0 ? (after - before) / before
                                              : std::numeric_limits<double>::quiet_NaN());
    }
    std::vector<double> finite;
    for (double v : row.improvements)
      if (std::isfinite(v)) finite.push_back(v);
    if (!finite.empty()) {
      row.mean = std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
      double var = 0.0;
      for (double v : finite) var += (v - row.mean) * (v - row.mean);
      row.stddev = std::sqrt(var / static_cast<double>(finite.size()));
    } else {
      row.mean = std::numeric_limits<double>::quiet_NaN();
      row.stddev = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_difficulty(const std::vector<DifficultyRow>& rows, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "difficulty.csv");
  if (!csv) throw DataError("cannot write difficulty.csv");
  csv.precision(17);
  csv << "drop_fraction,mean_improvement,std_improvement,reps\n";
  for (const DifficultyRow& r : rows)
    csv << r.fraction << "," << r.mean << "," << r.stddev << "," << r.improvements.size() << "\n";
}

std::vector<TimingRow> cmd_timing(const ExperimentConfig& config, const std::vector<int>& scales,
                                  int reps) {
  if (reps < 3) throw ConfigError("timing: reps must be >= 3");
  if (scales.empty()) throw ConfigError("timing: no scales given");
  std::vector<TimingRow> rows;
  for (int n : scales) {
    TimingRow row;
    row.scale = n;
    const SymMatrix q = random_coefficient_matrix(n, derive_seed(config.seed, 0x417e0000ULL + static_cast<std::uint64_t>(n)));
    const QuboProblem problem{q, std::nullopt, 1.0};
    for (SolverKind kind : config.solvers) {
      if (kind == SolverKind::exhaustive && n > 24) {
        log_warn("timing: skipping exhaustive at scale " + std::to_string(n));
        continue;
      }
      const std::string name = solver_name(kind);
      for (int rep = 0; rep < reps; ++rep) {
        const SolveResult res = solve(problem,
                                      solver_config_for(config, kind,
                                                        derive_seed(config.seed, "timing/" + name + "/" + std::to_string(n) + "/" + std::to_string(rep))));
        row.seconds[name].push_back(res.wall_time_s);
        row.evaluations[name] = res.evaluations;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_timing(const std::vector<TimingRow>& rows, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> solvers;
  for (const TimingRow& r : rows)
    for (const auto& [name, v] : r.seconds)
      if (std::find(solvers.begin(), solvers.end(), name) == solvers.end()) solvers.push_back(name);
  std::ofstream csv(fs::path(out_dir) / "timing.csv");
  if (!csv) throw DataError("cannot write timing.csv");
  csv << "scale";
  for (const auto& s : solvers) csv << "," << s << "_mean_s," << s << "_std_s," << s << "_evals";
  csv << "\n";
  for (const TimingRow& r : rows) {
    csv << r.scale;
    for (const auto& s : solvers) {
      auto it = r.seconds.find(s);
      if (it == r.seconds.end() || it->second.empty()) {
        csv << ",,,";
        continue;
      }
      const auto& v = it->second;
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double var = 0.0;
      for (double t : v) var += (t - mean) * (t - mean);
      csv << "," << mean << "," << std::sqrt(var / static_cast<double>(v.size())) << ","
          << r.evaluations.at(s);
    }
    csv << "\n";
  }
}

SymMatrix random_coefficient_matrix(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> diag(-0.1, 0.02);
  std::uniform_real_distribution<double> off(-0.02, 0.02);
  SymMatrix q(n);
  for (int i = 0; i < n; ++i) {
    q.set_sym(i, i, diag(rng));
    for (int j = i + 1; j < n; ++j) q.set_sym(i, j, off(rng));
  }
  return q;
}

ItemFeatureMatrix drop_feature_values(const ItemFeatureMatrix& features, double fraction,
                                      std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("drop fraction must lie in [0,1)");
  const std::size_t drop = static_cast<std::size_t>(fraction * static_cast<double>(features.nnz()));
  if (drop == 0) return features;
  std::vector<std::size_t> idx(features.nnz());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<char> dropped(features.nnz(), 0);
  for (std::size_t i = 0; i < drop; ++i) dropped[idx[i]] = 1;
  std::vector<Triplet> kept;
  kept.reserve(features.nnz() - drop);
  for (std::size_t i = 0; i < features.nnz(); ++i)
    if (!dropped[i]) kept.push_back(features.triplets()[i]);
  return ItemFeatureMatrix(features.num_items(), features.num_features(), std::move(kept));
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman_correlation(const std::vector<double>& a,
                                           const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  if (da <= 0.0 || db <= 0.0) return std::nullopt;
  return num / std::sqrt(da * db);
}

InteractionMatrix union_interactions(const InteractionMatrix& a, const InteractionMatrix& b) {
  if (a.num_users() != b.num_users() || a.num_items() != b.num_items())
    throw DataError("union_interactions: dimension mismatch");
  std::vector<std::pair<int, int>> pairs = a.all_pairs();
  const std::vector<std::pair<int, int>> more = b.all_pairs();
  pairs.insert(pairs.end(), more.begin(), more.end());
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return InteractionMatrix::from_pairs(a.num_users(), a.num_items(), std::move(pairs));
}

}  // namespace qubofs
