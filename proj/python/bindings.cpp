#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qubofs/counterfactual.hpp"
#include "qubofs/dataset.hpp"
#include "qubofs/experiment.hpp"
#include "qubofs/qubo.hpp"
#include "qubofs/recsys.hpp"
#include "qubofs/sampler_client.hpp"
#include "qubofs/solvers.hpp"

namespace py = pybind11;
using namespace qubofs;

namespace {

py::dict row_to_dict(const RunRow& r) {
  py::dict d;
  d["builder"] = r.builder;
  d["solver"] = r.solver;
  d["k"] = r.k_label;
  d["rep"] = r.rep;
  d["solve_seed"] = r.solve_seed;
  d["selected"] = r.selected;
  d["energy"] = r.energy;
  d["cardinality_ok"] = r.cardinality_ok;
  d["metric_before"] = r.metric_before;
  d["metric_after"] = r.metric_after;
  d["solve_seconds"] = r.solve_seconds;
  return d;
}

py::dict report_to_dict(const RunReport& report) {
  py::dict d;
  d["config"] = report.config;
  d["metric"] = report.metric;
  d["metric_before"] = report.metric_before;
  py::list rows;
  for (const RunRow& r : report.rows) rows.append(row_to_dict(r));
  d["rows"] = rows;
  return d;
}

ExperimentConfig config_from_dict(const py::dict& kv) {
  std::map<std::string, std::string> raw;
  for (const auto& item : kv)
    raw[py::cast<std::string>(item.first)] = py::cast<std::string>(py::str(item.second));
  return ExperimentConfig::from_map(raw);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "QUBO-based feature selection for recommender models";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<SolverError>(m, "SolverError");

  // dataset ------------------------------------------------------------
  py::class_<InteractionMatrix>(m, "InteractionMatrix")
      .def(py::init([](int num_users, int num_items, std::vector<std::pair<int, int>> pairs) {
             return InteractionMatrix::from_pairs(num_users, num_items, std::move(pairs));
           }),
           py::arg("num_users"), py::arg("num_items"), py::arg("pairs"))
      .def_property_readonly("num_users", &InteractionMatrix::num_users)
      .def_property_readonly("num_items", &InteractionMatrix::num_items)
      .def_property_readonly("num_entries", &InteractionMatrix::num_entries)
      .def("items_of", &InteractionMatrix::items_of, py::arg("user"))
      .def("has", &InteractionMatrix::has, py::arg("user"), py::arg("item"))
      .def("all_pairs", &InteractionMatrix::all_pairs);

  py::class_<ItemFeatureMatrix>(m, "ItemFeatureMatrix")
      .def(py::init([](int num_items, int num_features,
                       const std::vector<std::tuple<int, int, double>>& cells) {
             std::vector<Triplet> triplets;
             triplets.reserve(cells.size());
             for (const auto& [i, f, v] : cells) triplets.push_back(Triplet{i, f, v});
             return ItemFeatureMatrix(num_items, num_features, std::move(triplets));
           }),
           py::arg("num_items"), py::arg("num_features"), py::arg("triplets"))
      .def_property_readonly("num_items", &ItemFeatureMatrix::num_items)
      .def_property_readonly("num_features", &ItemFeatureMatrix::num_features)
      .def_property_readonly("nnz", &ItemFeatureMatrix::nnz)
      .def("sparsity", &ItemFeatureMatrix::sparsity)
      .def("triplets",
           [](const ItemFeatureMatrix& f) {
             std::vector<std::tuple<int, int, double>> out;
             for (const Triplet& t : f.triplets()) out.emplace_back(t.item, t.feature, t.value);
             return out;
           })
      .def("row", &ItemFeatureMatrix::row, py::arg("item"))
      .def("column", &ItemFeatureMatrix::column, py::arg("feature"))
      .def("masked_copy", &ItemFeatureMatrix::masked_copy, py::arg("masked_features"))
      .def("restricted_to", &ItemFeatureMatrix::restricted_to, py::arg("selected_features"));

  py::class_<SplitSpec>(m, "SplitSpec")
      .def(py::init<>())
      .def(py::init([](double test, double validation, std::uint64_t seed) {
             return SplitSpec{test, validation, seed};
           }),
           py::arg("test_fraction") = 0.2, py::arg("validation_fraction") = 0.2,
           py::arg("seed") = 0)
      .def_readwrite("test_fraction", &SplitSpec::test_fraction)
      .def_readwrite("validation_fraction", &SplitSpec::validation_fraction)
      .def_readwrite("seed", &SplitSpec::seed);

  py::class_<SplitResult>(m, "SplitResult")
      .def_readonly("train", &SplitResult::train)
      .def_readonly("validation", &SplitResult::validation)
      .def_readonly("test", &SplitResult::test);

  py::class_<CorpusManifest>(m, "CorpusManifest")
      .def_readonly("num_users", &CorpusManifest::num_users)
      .def_readonly("num_items", &CorpusManifest::num_items)
      .def_readonly("num_features", &CorpusManifest::num_features)
      .def_readonly("num_informative", &CorpusManifest::num_informative)
      .def_readonly("requested_sparsity", &CorpusManifest::requested_sparsity)
      .def_readonly("realized_sparsity", &CorpusManifest::realized_sparsity)
      .def_readonly("seed", &CorpusManifest::seed)
      .def_readonly("informative_features", &CorpusManifest::informative_features);

  py::class_<DatasetBundle>(m, "DatasetBundle")
      .def_readonly("train", &DatasetBundle::train)
      .def_readonly("validation", &DatasetBundle::validation)
      .def_readonly("test", &DatasetBundle::test)
      .def_readonly("features", &DatasetBundle::features)
      .def_readonly("manifest", &DatasetBundle::manifest);

  py::class_<LabeledSample>(m, "LabeledSample")
      .def_readonly("user", &LabeledSample::user)
      .def_readonly("item", &LabeledSample::item)
      .def_readonly("label", &LabeledSample::label);

  py::class_<SynthParams>(m, "SynthParams")
      .def(py::init<>())
      .def_readwrite("num_users", &SynthParams::num_users)
      .def_readwrite("num_items", &SynthParams::num_items)
      .def_readwrite("num_features", &SynthParams::num_features)
      .def_readwrite("num_informative", &SynthParams::num_informative)
      .def_readwrite("sparsity", &SynthParams::sparsity)
      .def_readwrite("seed", &SynthParams::seed)
      .def_readwrite("test_fraction", &SynthParams::test_fraction)
      .def_readwrite("validation_fraction", &SynthParams::validation_fraction);

  m.def("split", &split, py::arg("interactions"), py::arg("spec"));
  m.def("negative_sample", &negative_sample, py::arg("interactions"), py::arg("ratio"),
        py::arg("seed"));
  m.def("synthesize_corpus", &synthesize_corpus, py::arg("params"));
  m.def(
      "load_interactions",
      [](const std::string& path) {
        InteractionsLoad load = load_interactions(path);
        return py::make_tuple(load.matrix, load.duplicate_rows);
      },
      py::arg("path"), "Returns (matrix, duplicate_rows); ids are reindexed contiguously.");

  // recsys ---------------------------------------------------------------
  py::class_<MetricSpec>(m, "MetricSpec")
      .def(py::init([](const std::string& kind, int cutoff) {
             return metric_from_name(kind, cutoff);
           }),
           py::arg("kind") = "ndcg", py::arg("cutoff") = 10)
      .def_property_readonly("kind",
                             [](const MetricSpec& s) {
                               return s.kind == MetricSpec::Kind::ndcg ? "ndcg" : "recall";
                             })
      .def_readwrite("cutoff", &MetricSpec::cutoff)
      .def("__repr__", [](const MetricSpec& s) { return "<MetricSpec " + metric_name(s) + ">"; });

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("metric_value", &EvalResult::metric_value)
      .def_readonly("per_user_values", &EvalResult::per_user_values)
      .def_readonly("users_evaluated", &EvalResult::users_evaluated)
      .def("to_json", [](const EvalResult& r) {
        return eval_result_json(r, MetricSpec{MetricSpec::Kind::ndcg, 10});
      });

  py::class_<ItemKnnModel>(m, "ItemKnnModel")
      .def_readonly("num_items", &ItemKnnModel::num_items)
      .def_readonly("n_neighbors", &ItemKnnModel::n_neighbors)
      .def("row", [](const ItemKnnModel& model, int item) {
        return model.rows.at(static_cast<std::size_t>(item));
      });

  m.def("train_item_knn", &train_item_knn, py::arg("features"), py::arg("n_neighbors"));
  m.def("recommend", &recommend, py::arg("model"), py::arg("train"), py::arg("user"),
        py::arg("cutoff"));
  m.def("evaluate", &evaluate, py::arg("model"), py::arg("train"), py::arg("heldout"),
        py::arg("metric"));
  m.def("evaluate_with_mask", &evaluate_with_mask, py::arg("features"), py::arg("mask"),
        py::arg("train"), py::arg("heldout"), py::arg("metric"), py::arg("n_neighbors"));

  py::class_<ItemKnnMaskedEvaluator>(m, "ItemKnnMaskedEvaluator")
      .def(py::init([](const ItemFeatureMatrix& features, const InteractionMatrix& train,
                       const InteractionMatrix& heldout, const MetricSpec& metric, int n_neighbors,
                       const std::string& split_tag) {
             return ItemKnnMaskedEvaluator(features, train, heldout, metric, n_neighbors,
                                           split_from_name(split_tag));
           }),
           py::arg("features"), py::arg("train"), py::arg("heldout"), py::arg("metric"),
           py::arg("n_neighbors"), py::arg("split") = "validation")
      .def("metric_with_mask", &ItemKnnMaskedEvaluator::metric_with_mask, py::arg("mask"),
           py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("num_features", &ItemKnnMaskedEvaluator::num_features)
      .def_property_readonly("input_fingerprint", &ItemKnnMaskedEvaluator::input_fingerprint);

  // counterfactual -------------------------------------------------------
  py::class_<CounterfactualProfile>(m, "CounterfactualProfile")
      .def_readonly("baseline", &CounterfactualProfile::baseline)
      .def_readonly("singles", &CounterfactualProfile::singles)
      .def_property_readonly("num_features", &CounterfactualProfile::num_features)
      .def_property_readonly("mode",
                             [](const CounterfactualProfile& p) { return pair_mode_name(p.mode); })
      .def_property_readonly(
          "split", [](const CounterfactualProfile& p) { return split_name(p.evaluation_split); })
      .def("pair", [](const CounterfactualProfile& p, int i, int j) { return p.pairs.at(i, j); })
      .def_readonly("input_checksum", &CounterfactualProfile::input_checksum);

  m.def(
      "compute_profile",
      [](const ItemKnnMaskedEvaluator& evaluator, const std::string& mode, int num_threads,
         const std::string& checkpoint_path) {
        ProfileOptions options;
        options.mode = pair_mode_from_name(mode);
        options.num_threads = num_threads;
        options.checkpoint_path = checkpoint_path;
        return compute_profile(evaluator, options);
      },
      py::arg("evaluator"), py::arg("mode") = "comb", py::arg("num_threads") = 0,
      py::arg("checkpoint_path") = "", py::call_guard<py::gil_scoped_release>());
  m.def("compute_baseline",
        [](const ItemKnnMaskedEvaluator& e) { return compute_baseline(e); });
  m.def("save_profile", &save_profile, py::arg("profile"), py::arg("path"));
  m.def("load_profile", &load_profile, py::arg("path"));

  // qubo -------------------------------------------------------------
  py::class_<SymMatrix>(m, "SymMatrix")
      .def(py::init<int>(), py::arg("size"))
      .def_property_readonly("size", &SymMatrix::size)
      .def("at", &SymMatrix::at, py::arg("i"), py::arg("j"))
      .def("set_sym", &SymMatrix::set_sym, py::arg("i"), py::arg("j"), py::arg("value"))
      .def("to_lists", [](const SymMatrix& q) {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(q.size()));
        for (int i = 0; i < q.size(); ++i)
          for (int j = 0; j < q.size(); ++j) rows[static_cast<std::size_t>(i)].push_back(q.at(i, j));
        return rows;
      });

  py::class_<QuboProblem>(m, "QuboProblem")
      .def(py::init([](SymMatrix q, std::optional<int> k, double penalty_weight) {
             return QuboProblem{std::move(q), k, penalty_weight};
           }),
           py::arg("q"), py::arg("k") = std::nullopt, py::arg("penalty_weight") = 1.0)
      .def_readwrite("q", &QuboProblem::q)
      .def_readwrite("k", &QuboProblem::k)
      .def_readwrite("penalty_weight", &QuboProblem::penalty_weight)
      .def_property_readonly("size", &QuboProblem::size);

  m.def(
      "energy",
      [](const QuboProblem& p, const std::vector<int>& x) {
        BitVector bits(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) bits[i] = x[i] ? 1 : 0;
        return energy(p, bits);
      },
      py::arg("problem"), py::arg("x"));
  m.def("build_pdqubo", &build_pdqubo, py::arg("profile"), py::arg("pair_counted_once") = false);
  m.def("build_miqubo", &build_miqubo, py::arg("features"), py::arg("labels"));
  m.def("build_coqubo", &build_coqubo, py::arg("features"), py::arg("labels"));
  m.def(
      "build_boosting",
      [](const std::vector<std::vector<int>>& predictions, const std::vector<LabeledSample>& labels,
         double regularizer) {
        std::vector<std::vector<std::int8_t>> s(predictions.size());
        for (std::size_t i = 0; i < predictions.size(); ++i)
          for (int v : predictions[i]) s[i].push_back(static_cast<std::int8_t>(v));
        return build_boosting(s, labels, regularizer);
      },
      py::arg("predictions"), py::arg("labels"), py::arg("regularizer") = 0.0);
  m.def("single_feature_sign_predictions",
        [](const ItemFeatureMatrix& features, const InteractionMatrix& train,
           const std::vector<LabeledSample>& samples, int n_neighbors) {
          std::vector<std::vector<int>> out;
          for (const auto& row : single_feature_sign_predictions(features, train, samples, n_neighbors))
            out.emplace_back(row.begin(), row.end());
          return out;
        });

  py::class_<QuboValidationReport>(m, "QuboValidationReport")
      .def_readonly("size", &QuboValidationReport::size)
      .def_readonly("min_value", &QuboValidationReport::min_value)
      .def_readonly("max_value", &QuboValidationReport::max_value)
      .def_readonly("diag_min", &QuboValidationReport::diag_min)
      .def_readonly("diag_max", &QuboValidationReport::diag_max)
      .def_readonly("diag_mean", &QuboValidationReport::diag_mean)
      .def_readonly("offdiag_mean_abs", &QuboValidationReport::offdiag_mean_abs)
      .def_readonly("diag_dominance_fraction", &QuboValidationReport::diag_dominance_fraction);
  m.def("validate_q", [](const SymMatrix& q) { return validate(q); });
  m.def("save_matrix_json", &save_matrix_json, py::arg("q"), py::arg("path"));
  m.def("load_matrix_json", &load_matrix_json, py::arg("path"));
  m.def("save_matrix_triplets", &save_matrix_triplets, py::arg("q"), py::arg("path"));

  // solvers --------------------------------------------------------------
  py::enum_<SolverKind>(m, "SolverKind")
      .value("exhaustive", SolverKind::exhaustive)
      .value("sa", SolverKind::sa)
      .value("tabu", SolverKind::tabu)
      .value("sgd", SolverKind::sgd)
      .value("external_stub", SolverKind::external_stub);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init([](const std::string& kind, std::uint64_t seed, int num_samples,
                       bool record_samples) {
             SolverConfig cfg;
             cfg.kind = solver_from_name(kind);
             cfg.seed = seed;
             cfg.num_samples = num_samples;
             cfg.record_samples = record_samples;
             return cfg;
           }),
           py::arg("kind") = "sa", py::arg("seed") = 0, py::arg("num_samples") = 2000,
           py::arg("record_samples") = false)
      .def_readwrite("seed", &SolverConfig::seed)
      .def_readwrite("num_samples", &SolverConfig::num_samples)
      .def_readwrite("record_samples", &SolverConfig::record_samples);

  py::class_<SolveResult>(m, "SolveResult")
      .def_property_readonly("best",
                             [](const SolveResult& r) {
                               std::vector<int> bits(r.best.begin(), r.best.end());
                               return bits;
                             })
      .def_property_readonly("selected", [](const SolveResult& r) { return ones_of(r.best); })
      .def_readonly("best_energy", &SolveResult::best_energy)
      .def_readonly("wall_time_s", &SolveResult::wall_time_s)
      .def_readonly("evaluations", &SolveResult::evaluations)
      .def_readonly("solver_tag", &SolveResult::solver_tag)
      .def_property_readonly("sample_energies", [](const SolveResult& r) {
        std::vector<double> out;
        for (const auto& [e, bits] : r.samples) out.push_back(e);
        return out;
      });

  m.def("solve", &solve, py::arg("problem"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("solve_exhaustive", &solve_exhaustive, py::arg("problem"));

  py::class_<StabilityReport>(m, "StabilityReport")
      .def_readonly("sample_count", &StabilityReport::sample_count)
      .def_readonly("sample_energies", &StabilityReport::sample_energies)
      .def_readonly("min", &StabilityReport::min)
      .def_readonly("mean", &StabilityReport::mean)
      .def_readonly("variance", &StabilityReport::variance);
  m.def("sample_stability", &sample_stability, py::arg("problem"), py::arg("config"),
        py::arg("sample_counts"), py::arg("outer_reps"),
        py::call_guard<py::gil_scoped_release>());

  m.def("format_wire_request", &format_wire_request, py::arg("problem"));
  m.def("parse_wire_response", &parse_wire_response, py::arg("text"), py::arg("expected_size"));

  // experiment -------------------------------------------------------
  m.def(
      "run_pipeline",
      [](const py::dict& config) {
        const ExperimentConfig cfg = config_from_dict(config);
        RunReport report;
        {
          py::gil_scoped_release release;
          report = run_pipeline(cfg);
        }
        return report_to_dict(report);
      },
      py::arg("config"), "Run the full selection pipeline from a {key: value} config dict.");
  m.def(
      "energy_vs_performance",
      [](const py::dict& config, int num_solutions) {
        const ExperimentConfig cfg = config_from_dict(config);
        ScatterResult r;
        {
          py::gil_scoped_release release;
          r = cmd_energy_vs_performance(cfg, num_solutions);
        }
        py::dict d;
        py::list points;
        for (const ScatterPoint& p : r.points) {
          py::dict point;
          point["energy"] = p.energy;
          point["metric"] = p.metric;
          point["bits"] = p.bits;
          points.append(point);
        }
        d["points"] = points;
        d["k"] = r.k;
        d["split"] = r.split;
        if (r.spearman)
          d["spearman"] = *r.spearman;
        else
          d["spearman"] = py::none();
        return d;
      },
      py::arg("config"), py::arg("num_solutions") = 200);
  m.def("spearman_correlation", &spearman_correlation, py::arg("a"), py::arg("b"));
}
