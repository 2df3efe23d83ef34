// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qubofs/counterfactual.hpp"
#include "qubofs/experiment.hpp"
#include "qubofs/qubo.hpp"
#include "qubofs/recsys.hpp"
#include "qubofs/solvers.hpp"

using namespace qubofs;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

ExperimentConfig planted_config() {
  ExperimentConfig config = ExperimentConfig::from_map({});
  config.synth.num_users = 100;
  config.synth.num_items = 200;
  config.synth.num_features = 30;
  config.synth.num_informative = 8;
  config.synth.sparsity = 0.8;
  config.seed = 123;
  config.synth.seed = 123;
  config.synth_seed_set = true;
  config.n_neighbors = 100;
  config.builder = "pdqubo";
  config.k_list = {std::optional<int>{8}};
  config.solvers = {SolverKind::sa};
  config.repeats = 5;
  config.threads = 2;
  config.num_samples = 2000;
  return config;
}

// ---------------------------------------------------------------- 1
Outcome oracle_optimality() {
  Outcome out;
  int sa_hits = 0, tabu_hits = 0;
  for (int t = 0; t < 100; ++t) {
    std::mt19937_64 rng(42000 + t);
    const int n = 4 + static_cast<int>(rng() % 9);  // 4..12
    QuboProblem p;
    p.q = oracle::random_q(n, rng());
    if (rng() % 2) {
      p.k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      p.penalty_weight = 1.0;
    }
    const double truth = solve_exhaustive(p).best_energy;
    SolverConfig cfg;  // default budgets
    cfg.seed = 9000 + t;
    cfg.kind = SolverKind::sa;
    const double sa = solve_sa(p, cfg).best_energy;
    cfg.kind = SolverKind::tabu;
    const double tabu = solve_tabu(p, cfg).best_energy;
    if (sa < truth - 1e-9 || tabu < truth - 1e-9) {
      out.pass = false;
      out.detail = "undershoot at instance " + std::to_string(t);
      return out;
    }
    if (sa <= truth + 1e-9) ++sa_hits;
    if (tabu <= truth + 1e-9) ++tabu_hits;
  }
  out.pass = sa_hits >= 95 && tabu_hits >= 95;
  out.detail = "sa " + std::to_string(sa_hits) + "/100, tabu " + std::to_string(tabu_hits) +
               "/100 optimal, no undershoot";
  return out;
}

// ---------------------------------------------------------------- 2
Outcome energy_correctness() {
  Outcome out;
  std::mt19937_64 rng(31415);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng() % 50);
    QuboProblem p;
    p.q = oracle::random_q(n, rng());
    if (rng() % 2) p.k = static_cast<int>(rng() % static_cast<std::uint64_t>(n + 1));
    p.penalty_weight = 10.0 * unit(rng);
    BitVector x(static_cast<std::size_t>(n));
    for (auto& b : x) b = rng() & 1;
    const double fast = energy(p, x);
    const double naive = oracle::naive_energy(p, x);
    const double rel = std::abs(fast - naive) / std::max(1.0, std::abs(naive));
    worst = std::max(worst, rel);
  }
  out.pass = worst <= 1e-10;
  out.detail = "worst relative error " + fmt(worst) + " over 1000 triples";
  return out;
}

// ---------------------------------------------------------------- 3
Outcome counterfactual_oracle() {
  Outcome out;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    std::mt19937_64 rng(500 + t);
    const int items = 4 + static_cast<int>(rng() % 5);     // <= 8
    const int features = 4 + static_cast<int>(rng() % 3);  // <= 6
    auto corpus = oracle::random_corpus(4, items, features, 0.6, 7700 + t, 4);
    const MetricSpec metric{MetricSpec::Kind::ndcg, 3};
    const int nn = 3;
    ItemKnnMaskedEvaluator evaluator(corpus.features, corpus.train, corpus.heldout, metric, nn,
                                     Split::validation);
    const double baseline = compute_baseline(evaluator);
    const std::vector<double> singles = compute_singles(evaluator, baseline);
    const SymMatrix pairs = compute_pairs(evaluator, baseline);
    for (int i = 0; i < features; ++i) {
      const double want = baseline - oracle::brute_metric(corpus.features, {i}, corpus.train,
                                                          corpus.heldout, metric, nn);
      worst = std::max(worst, std::abs(singles[static_cast<std::size_t>(i)] - want));
      for (int j = i + 1; j < features; ++j) {
        const double want_ij = baseline - oracle::brute_metric(corpus.features, {i, j}, corpus.train,
                                                               corpus.heldout, metric, nn);
        worst = std::max(worst, std::abs(pairs.at(i, j) - want_ij));
      }
    }
  }
  out.pass = worst <= 1e-12;
  out.detail = "worst |E - oracle| = " + fmt(worst) + " over 50 corpora";
  return out;
}

// ---------------------------------------------------------------- 4
Outcome pdqubo_fidelity() {
  Outcome out;
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> value(-0.1, 0.1);
  for (int t = 0; t < 20; ++t) {
    const int n = 3 + static_cast<int>(rng() % 20);
    CounterfactualProfile profile;
    profile.singles.resize(static_cast<std::size_t>(n));
    for (double& e : profile.singles) e = value(rng);
    profile.pairs = SymMatrix(n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) profile.pairs.set_sym(i, j, value(rng));
    const SymMatrix q = build_pdqubo(profile);
    for (int i = 0; i < n; ++i) {
      if (q.at(i, i) != -profile.singles[static_cast<std::size_t>(i)]) out.pass = false;
      for (int j = 0; j < n; ++j)
        if (i != j && q.at(i, j) != -profile.pairs.at(i, j)) out.pass = false;
    }
  }
  out.detail = "Q_ii = -E_i and Q_ij = -E_ij exact on 20 random profiles";
  return out;
}

// ---------------------------------------------------------------- 5
Outcome planted_recovery() {
  Outcome out;
  ExperimentConfig config = planted_config();
  const DatasetBundle bundle = load_data(config);
  const std::set<int> informative(bundle.manifest->informative_features.begin(),
                                  bundle.manifest->informative_features.end());
  const RunReport report = run_pipeline(config);

  double recovery = 0.0, metric_after = 0.0;
  for (const RunRow& row : report.rows) {
    int hits = 0;
    for (int f : row.selected)
      if (informative.count(f)) ++hits;
    recovery += static_cast<double>(hits) / 8.0;
    metric_after += row.metric_after;
  }
  recovery /= static_cast<double>(report.rows.size());
  metric_after /= static_cast<double>(report.rows.size());

  // mean test metric of 100 uniform random size-8 subsets
  const InteractionMatrix trainval = union_interactions(bundle.train, bundle.validation);
  std::mt19937_64 rng(4242);
  std::vector<int> all(30);
  std::iota(all.begin(), all.end(), 0);
  double random_mean = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> subset(all.begin(), all.begin() + 8);
    ItemKnnModel model = train_item_knn(bundle.features.restricted_to(subset), config.n_neighbors);
    random_mean += evaluate(model, trainval, bundle.test, config.metric).metric_value;
  }
  random_mean /= 100.0;

  out.pass = recovery >= 0.8 && metric_after > random_mean;
  out.detail = "recovery " + fmt(recovery) + " (>=0.8), metric-after " + fmt(metric_after) +
               " vs random-subset mean " + fmt(random_mean);
  return out;
}

// ---------------------------------------------------------------- 6
Outcome energy_performance_correlation() {
  Outcome out;
  ExperimentConfig config = planted_config();
  const ScatterResult pd = cmd_energy_vs_performance(config, 200);
  config.builder = "miqubo";
  const ScatterResult mi = cmd_energy_vs_performance(config, 200);
  const double pd_rho = pd.spearman.value_or(0.0);
  out.pass = pd.points.size() >= 200 && pd.spearman.has_value() && pd_rho <= -0.5;
  out.detail = "pdqubo rho " + fmt(pd_rho) + " (<= -0.5) over " + std::to_string(pd.points.size()) +
               " solutions; miqubo rho " +
               (mi.spearman ? fmt(*mi.spearman) : std::string("null")) + " (recorded)";
  return out;
}

// ---------------------------------------------------------------- 7
Outcome comb_vs_indiv() {
  Outcome out;
  ExperimentConfig comb = planted_config();
  comb.repeats = 20;
  ExperimentConfig indiv = comb;
  indiv.builder = "pdqubo-indiv";
  const RunReport comb_report = run_pipeline(comb);
  const RunReport indiv_report = run_pipeline(indiv);

  std::vector<double> a, b;
  double mean_a = 0.0, mean_b = 0.0;
  for (const RunRow& row : comb_report.rows) {
    a.push_back(row.metric_after);
    mean_a += row.metric_after;
  }
  for (const RunRow& row : indiv_report.rows) {
    b.push_back(row.metric_after);
    mean_b += row.metric_after;
  }
  mean_a /= static_cast<double>(a.size());
  mean_b /= static_cast<double>(b.size());

  // two-sample Kolmogorov-Smirnov statistic, reported without a threshold
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double ks = 0.0;
  for (double x : a) {
    const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), x) - a.begin()) / a.size();
    const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size();
    ks = std::max(ks, std::abs(fa - fb));
  }
  for (double x : b) {
    const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), x) - a.begin()) / a.size();
    const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size();
    ks = std::max(ks, std::abs(fa - fb));
  }

  out.pass = mean_a >= mean_b;
  out.detail = "comb mean " + fmt(mean_a) + " >= indiv mean " + fmt(mean_b) + " over 20 runs; KS " +
               fmt(ks) + " (reported)";
  return out;
}

// ---------------------------------------------------------------- 8
Outcome stability_laws() {
  Outcome out;
  // (a) min energy nonincreasing in sample count, exactly, per instance
  for (int t = 0; t < 10; ++t) {
    QuboProblem p{oracle::random_q(12 + t, 6100 + t), 5, 1.0};
    SolverConfig cfg;
    cfg.kind = SolverKind::sa;
    cfg.seed = 40 + t;
    const auto reports = sample_stability(p, cfg, {1, 5, 20, 100}, 5);
    for (std::size_t ci = 1; ci < reports.size(); ++ci)
      for (std::size_t rep = 0; rep < reports[ci].sample_energies.size(); ++rep)
        if (reports[ci].sample_energies[rep] > reports[ci - 1].sample_energies[rep] + 1e-12) {
          out.pass = false;
          out.detail = "min energy increased with sample count at instance " + std::to_string(t);
          return out;
        }
  }
  // (b) unconstrained optimum <= constrained optimum, exact via enumeration
  for (int t = 0; t < 20; ++t) {
    std::mt19937_64 rng(777 + t);
    const int n = 4 + static_cast<int>(rng() % 11);
    QuboProblem unconstrained{oracle::random_q(n, rng()), std::nullopt, 1.0};
    QuboProblem constrained = unconstrained;
    constrained.k = std::max(1, static_cast<int>(std::llround(0.9 * n)));
    constrained.penalty_weight = std::numeric_limits<double>::infinity();
    const double uc = solve_exhaustive(unconstrained).best_energy;
    const double c = solve_exhaustive(constrained).best_energy;
    if (uc > c + 1e-12) {
      out.pass = false;
      out.detail = "feasible-subset violation at instance " + std::to_string(t);
      return out;
    }
  }
  out.detail = "min-energy monotone in samples (10 instances); unconstrained <= k-constrained "
               "(20 instances, exact)";
  return out;
}

// ---------------------------------------------------------------- 9
Outcome gradient_check() {
  Outcome out;
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> interior(0.15, 0.85);
  double worst = 0.0;
  int points = 0;
  while (points < 100) {
    const int n = 4 + static_cast<int>(rng() % 20);
    QuboProblem p{oracle::random_q(n, rng()), static_cast<int>(rng() % static_cast<std::uint64_t>(n + 1)), 1.5};
    std::vector<double> x(static_cast<std::size_t>(n));
    for (double& xi : x) xi = interior(rng);
    const std::vector<double> g = relaxed_gradient(p, x);
    const double h = 1e-6;
    for (int i = 0; i < n && points < 100; ++i, ++points) {
      std::vector<double> plus = x, minus = x;
      plus[static_cast<std::size_t>(i)] += h;
      minus[static_cast<std::size_t>(i)] -= h;
      const double fd = (relaxed_energy(p, plus) - relaxed_energy(p, minus)) / (2.0 * h);
      worst = std::max(worst, std::abs(g[static_cast<std::size_t>(i)] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  out.pass = worst < 1e-5;
  out.detail = "worst relative gradient error " + fmt(worst) + " at 100 interior points";
  return out;
}

// ---------------------------------------------------------------- 10
Outcome mi_correctness() {
  Outcome out;
  double worst = 0.0;
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    const int nf = 4, ni = 10, ns = 24;
    std::vector<Triplet> triplets;
    for (int i = 0; i < ni; ++i)
      for (int f = 0; f < nf; ++f)
        if (rng() % 2) triplets.push_back(Triplet{i, f, 1.0});
    ItemFeatureMatrix features(ni, nf, std::move(triplets));
    std::vector<LabeledSample> labels;
    for (int t = 0; t < ns; ++t)
      labels.push_back({0, static_cast<int>(rng() % ni), static_cast<int>(rng() % 2)});
    labels[0].label = 0;
    labels[1].label = 1;

    const SymMatrix q = build_miqubo(features, labels);
    std::vector<std::vector<int>> bin(nf, std::vector<int>(labels.size(), 0));
    std::vector<int> y;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      y.push_back(labels[t].label);
      for (const auto& [f, v] : features.row(labels[t].item)) bin[static_cast<std::size_t>(f)][t] = 1;
    }
    for (int i = 0; i < nf; ++i) {
      worst = std::max(worst,
                       std::abs(q.at(i, i) + oracle::brute_mi(bin[static_cast<std::size_t>(i)], y)));
      for (int j = i + 1; j < nf; ++j) {
        const double want = -0.5 * (oracle::brute_cmi(bin[static_cast<std::size_t>(i)], y,
                                                      bin[static_cast<std::size_t>(j)]) +
                                    oracle::brute_cmi(bin[static_cast<std::size_t>(j)], y,
                                                      bin[static_cast<std::size_t>(i)]));
        worst = std::max(worst, std::abs(q.at(i, j) - want));
      }
    }
  }

  // a feature identical to balanced labels scores -H(y) = -ln 2
  ItemFeatureMatrix f(2, 2, {{1, 0, 1.0}});
  std::vector<LabeledSample> labels{{0, 1, 1}, {0, 0, 0}, {1, 1, 1}, {1, 0, 0}};
  const SymMatrix q = build_miqubo(f, labels);
  const double diag_err = std::abs(q.at(0, 0) + std::log(2.0));
  worst = std::max(worst, diag_err);

  out.pass = worst <= 1e-12;
  out.detail = "worst |Q - oracle| = " + fmt(worst) + "; identical-to-label diagonal -ln 2";
  return out;
}

// ---------------------------------------------------------------- 11
Outcome determinism() {
  Outcome out;
  ExperimentConfig config = planted_config();
  config.repeats = 2;
  const RunReport first = run_pipeline(config);
  const ExperimentConfig embedded = ExperimentConfig::from_map(first.config);
  const RunReport second = run_pipeline(embedded);
  out.pass = first.rows.size() == second.rows.size() &&
             first.metric_before == second.metric_before;
  for (std::size_t i = 0; out.pass && i < first.rows.size(); ++i) {
    out.pass = first.rows[i].selected == second.rows[i].selected &&
               first.rows[i].energy == second.rows[i].energy &&
               first.rows[i].metric_after == second.rows[i].metric_after;
  }
  out.detail = "rerun from the embedded config reproduced " + std::to_string(first.rows.size()) +
               " rows exactly";
  return out;
}

}  // namespace

int main() {
  using Clock = std::chrono::steady_clock;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle optimality of sa and tabu", oracle_optimality},
      {"energy equals naive double-loop expansion", energy_correctness},
      {"counterfactuals equal the retrain oracle", counterfactual_oracle},
      {"coefficient matrix negates the profile exactly", pdqubo_fidelity},
      {"planted-feature recovery beats random subsets", planted_recovery},
      {"negative energy-performance correlation", energy_performance_correlation},
      {"comb mode outperforms indiv mode", comb_vs_indiv},
      {"stability laws (order statistics, feasible subset)", stability_laws},
      {"analytic gradient matches finite differences", gradient_check},
      {"mutual-information matrix matches the oracle", mi_correctness},
      {"pipeline rerun reproduces the report", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("[%s] %2zu. %s (%.1fs) %s\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), seconds, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
