#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "oracles.hpp"
#include "qubofs/qubo.hpp"

using namespace qubofs;

namespace {

CounterfactualProfile random_profile(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(-0.05, 0.05);
  CounterfactualProfile p;
  p.baseline = 0.3;
  p.metric = MetricSpec{MetricSpec::Kind::ndcg, 10};
  p.singles.resize(static_cast<std::size_t>(n));
  for (double& e : p.singles) e = value(rng);
  p.pairs = SymMatrix(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) p.pairs.set_sym(i, j, value(rng));
  return p;
}

}  // namespace

TEST_CASE("energy evaluates the quadratic plus the cardinality penalty") {
  SUBCASE("pure penalty for the empty selection") {
    QuboProblem p{SymMatrix(3), 2, 1.0};
    CHECK(energy(p, {0, 0, 0}) == doctest::Approx(4.0));
  }
  SUBCASE("satisfied cardinality on a zero matrix") {
    QuboProblem p{SymMatrix(2), 2, 1.0};
    CHECK(energy(p, {1, 1}) == doctest::Approx(0.0));
  }
  SUBCASE("hand expansion of x^T Q x") {
    SymMatrix q(2);
    q.set_sym(0, 0, -1.0);
    q.set_sym(1, 1, -1.0);
    q.set_sym(0, 1, 0.5);
    QuboProblem p{q, 2, 1.0};
    CHECK(energy(p, {1, 1}) == doctest::Approx(-1.0));
  }
  SUBCASE("absent k omits the penalty entirely") {
    QuboProblem p{SymMatrix(3), std::nullopt, 1.0};
    CHECK(energy(p, {1, 0, 1}) == 0.0);
  }
  SUBCASE("infinite weight is a hard constraint") {
    QuboProblem p{SymMatrix(2), 1, std::numeric_limits<double>::infinity()};
    CHECK(std::isinf(energy(p, {1, 1})));
    CHECK(energy(p, {1, 0}) == 0.0);
  }
  SUBCASE("dimension mismatch is rejected") {
    QuboProblem p{SymMatrix(3), std::nullopt, 1.0};
    CHECK_THROWS_AS(energy(p, {1, 0}), DataError);
  }
}

TEST_CASE("energy matches the naive double-loop expansion on random triples") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    QuboProblem p;
    p.q = oracle::random_q(n, rng());
    if (rng() % 2) p.k = static_cast<int>(rng() % static_cast<std::uint64_t>(n + 1));
    p.penalty_weight = unit(rng) * 10.0;
    BitVector x(static_cast<std::size_t>(n));
    for (auto& b : x) b = rng() & 1;
    const double fast = energy(p, x);
    const double naive = oracle::naive_energy(p, x);
    CHECK(fast == doctest::Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("build_pdqubo negates the profile entries exactly") {
  CounterfactualProfile profile = random_profile(12, 5);
  SymMatrix q = build_pdqubo(profile);
  for (int i = 0; i < 12; ++i) {
    CHECK(q.at(i, i) == -profile.singles[static_cast<std::size_t>(i)]);
    for (int j = i + 1; j < 12; ++j) {
      CHECK(q.at(i, j) == -profile.pairs.at(i, j));
      CHECK(q.at(i, j) == q.at(j, i));
    }
  }

  SUBCASE("null counterfactuals give the zero matrix") {
    CounterfactualProfile zero;
    zero.singles.assign(4, 0.0);
    zero.pairs = SymMatrix(4);
    SymMatrix z = build_pdqubo(zero);
    for (double v : z.values()) CHECK(v == 0.0);
  }
  SUBCASE("a single positive delta lands negated on the diagonal") {
    CounterfactualProfile p;
    p.singles.assign(3, 0.0);
    p.singles[1] = 0.02;
    p.pairs = SymMatrix(3);
    CHECK(build_pdqubo(p).at(1, 1) == -0.02);
  }
  SUBCASE("indiv profiles yield a diagonal-only matrix") {
    CounterfactualProfile p = random_profile(6, 9);
    p.pairs = SymMatrix(6);  // indiv: pairs zeroed
    p.mode = PairMode::indiv;
    SymMatrix d = build_pdqubo(p);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (i != j) CHECK(d.at(i, j) == 0.0);
  }
  SUBCASE("scaling the profile scales the matrix linearly") {
    CounterfactualProfile scaled = profile;
    const double c = 3.5;
    for (double& e : scaled.singles) e *= c;
    for (int i = 0; i < 12; ++i)
      for (int j = i + 1; j < 12; ++j) scaled.pairs.set_sym(i, j, profile.pairs.at(i, j) * c);
    SymMatrix qc = build_pdqubo(scaled);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) CHECK(qc.at(i, j) == doctest::Approx(c * q.at(i, j)).epsilon(1e-15));
  }
  SUBCASE("pair_counted_once halves the off-diagonal") {
    SymMatrix half = build_pdqubo(profile, true);
    for (int i = 0; i < 12; ++i) {
      CHECK(half.at(i, i) == q.at(i, i));
      for (int j = i + 1; j < 12; ++j) CHECK(half.at(i, j) == doctest::Approx(0.5 * q.at(i, j)));
    }
  }
}

TEST_CASE("shifting the metric by a constant leaves the profile differences unchanged") {
  // E values are differences of metric values, so a level shift cancels
  const std::vector<double> metrics{0.31, 0.28, 0.35, 0.30};
  const double baseline = 0.33;
  std::vector<double> singles, shifted;
  const double c = 0.17;
  for (double m : metrics) {
    singles.push_back(baseline - m);
    shifted.push_back((baseline + c) - (m + c));
  }
  for (std::size_t i = 0; i < singles.size(); ++i)
    CHECK(singles[i] == doctest::Approx(shifted[i]).epsilon(1e-12));
}

TEST_CASE("build_miqubo estimates (conditional) mutual information in nats") {
  // features: 0 = identical to label, 1 = constant over samples, 2 = mixed
  // items: 0 -> {f0, f1}, 1 -> {f1}, 2 -> {f0, f1, f2}, 3 -> {f1, f2}
  ItemFeatureMatrix f(4, 3,
                      {{0, 0, 1.0}, {0, 1, 1.0}, {1, 1, 1.0},
                       {2, 0, 1.0}, {2, 1, 1.0}, {2, 2, 1.0}, {3, 1, 1.0}, {3, 2, 1.0}});
  // balanced labels; feature 0 present exactly on the positive samples
  std::vector<LabeledSample> labels{{0, 0, 1}, {0, 1, 0}, {1, 2, 1}, {1, 3, 0}};
  SymMatrix q = build_miqubo(f, labels);

  CHECK(q.at(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));  // identical to label
  CHECK(q.at(1, 1) == doctest::Approx(0.0));                            // constant feature

  SUBCASE("entries match the entropy-route oracle") {
    std::vector<std::vector<int>> bin(3, std::vector<int>(labels.size(), 0));
    std::vector<int> y;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      y.push_back(labels[t].label);
      for (const auto& [feat, v] : f.row(labels[t].item)) bin[static_cast<std::size_t>(feat)][t] = 1;
    }
    for (int i = 0; i < 3; ++i)
      CHECK(q.at(i, i) == doctest::Approx(-oracle::brute_mi(bin[static_cast<std::size_t>(i)], y))
                              .epsilon(1e-12));
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        const double expected = -0.5 * (oracle::brute_cmi(bin[static_cast<std::size_t>(i)], y,
                                                          bin[static_cast<std::size_t>(j)]) +
                                        oracle::brute_cmi(bin[static_cast<std::size_t>(j)], y,
                                                          bin[static_cast<std::size_t>(i)]));
        CHECK(q.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
      }
  }
  SUBCASE("degenerate labels are rejected") {
    std::vector<LabeledSample> ones{{0, 0, 1}, {0, 1, 1}};
    CHECK_THROWS_WITH_AS(build_miqubo(f, ones), doctest::Contains("uninformative"), DataError);
  }
}

TEST_CASE("build_miqubo matches the oracle on a random 20-sample table") {
  std::mt19937_64 rng(777);
  const int nf = 5, ni = 12, ns = 20;
  std::vector<Triplet> triplets;
  for (int i = 0; i < ni; ++i)
    for (int f = 0; f < nf; ++f)
      if (rng() % 2) triplets.push_back(Triplet{i, f, 1.0});
  ItemFeatureMatrix features(ni, nf, std::move(triplets));
  std::vector<LabeledSample> labels;
  for (int t = 0; t < ns; ++t)
    labels.push_back({0, static_cast<int>(rng() % ni), static_cast<int>(rng() % 2)});
  // ensure both label values occur
  labels[0].label = 0;
  labels[1].label = 1;

  SymMatrix q = build_miqubo(features, labels);
  std::vector<std::vector<int>> bin(nf, std::vector<int>(labels.size(), 0));
  std::vector<int> y;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    y.push_back(labels[t].label);
    for (const auto& [feat, v] : features.row(labels[t].item)) bin[static_cast<std::size_t>(feat)][t] = 1;
  }
  for (int i = 0; i < nf; ++i) {
    CHECK(q.at(i, i) ==
          doctest::Approx(-oracle::brute_mi(bin[static_cast<std::size_t>(i)], y)).epsilon(1e-12));
    CHECK(q.at(i, i) <= 1e-15);  // diagonal lies in [-H(y), 0]
    CHECK(q.at(i, i) >= -std::log(2.0) - 1e-12);
    for (int j = i + 1; j < nf; ++j) {
      const double expected = -0.5 * (oracle::brute_cmi(bin[static_cast<std::size_t>(i)], y,
                                                        bin[static_cast<std::size_t>(j)]) +
                                      oracle::brute_cmi(bin[static_cast<std::size_t>(j)], y,
                                                        bin[static_cast<std::size_t>(i)]));
      CHECK(q.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("build_coqubo fills relevance and redundancy correlations") {
  // item features engineered so feature 0 equals the label over samples
  ItemFeatureMatrix f(4, 4,
                      {{0, 0, 1.0}, {0, 1, 2.0}, {0, 3, 1.0},
                       {2, 0, 1.0}, {2, 1, 2.0}, {2, 3, 2.0}, {3, 2, 0.7}});
  std::vector<LabeledSample> labels{{0, 0, 1}, {0, 1, 0}, {1, 2, 1}, {1, 3, 0}};
  SymMatrix q = build_coqubo(f, labels);

  CHECK(q.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));  // perfect correlation
  CHECK(q.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));   // identical columns (scaled)
  // feature 3 is constant over items 0 and 2 but varies across samples

  SUBCASE("zero-variance feature zeroes its row and diagonal") {
    // a feature absent from every sampled item has variance 0
    ItemFeatureMatrix g(2, 2, {{0, 0, 1.0}});
    std::vector<LabeledSample> l{{0, 0, 1}, {0, 1, 0}};
    SymMatrix qq = build_coqubo(g, l);
    CHECK(qq.at(1, 1) == 0.0);
    CHECK(qq.at(0, 1) == 0.0);
  }
  SUBCASE("entries match the two-pass pearson oracle") {
    const int nf = f.num_features();
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(nf),
                                          std::vector<double>(labels.size(), 0.0));
    std::vector<double> y;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      y.push_back(labels[t].label);
      for (const auto& [feat, v] : f.row(labels[t].item)) cols[static_cast<std::size_t>(feat)][t] = v;
    }
    for (int i = 0; i < nf; ++i) {
      CHECK(q.at(i, i) ==
            doctest::Approx(-std::abs(oracle::brute_pearson(cols[static_cast<std::size_t>(i)], y)))
                .epsilon(1e-12));
      for (int j = i + 1; j < nf; ++j)
        CHECK(q.at(i, j) == doctest::Approx(std::abs(oracle::brute_pearson(
                                 cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)])))
                                 .epsilon(1e-12));
    }
    // range invariants: diagonal in [-1, 0], off-diagonal in [0, 1]
    for (int i = 0; i < nf; ++i) {
      CHECK(q.at(i, i) <= 0.0);
      CHECK(q.at(i, i) >= -1.0);
      for (int j = i + 1; j < nf; ++j) {
        CHECK(q.at(i, j) >= 0.0);
        CHECK(q.at(i, j) <= 1.0);
      }
    }
  }
  CHECK_THROWS_AS(build_coqubo(f, {{0, 0, 1}}), DataError);  // fewer than 2 samples
}

TEST_CASE("build_boosting implements the weak-learner quadratic form") {
  std::vector<LabeledSample> labels;
  for (int t = 0; t < 8; ++t) labels.push_back({0, t % 3, t % 2});

  SUBCASE("a predictor matching the labels scores -2 with zero regularizer") {
    std::vector<std::vector<std::int8_t>> preds(2, std::vector<std::int8_t>(8));
    for (int t = 0; t < 8; ++t) {
      preds[0][static_cast<std::size_t>(t)] = labels[static_cast<std::size_t>(t)].label ? 1 : -1;
      preds[1][static_cast<std::size_t>(t)] = preds[0][static_cast<std::size_t>(t)];
    }
    SymMatrix q = build_boosting(preds, labels, 0.0);
    CHECK(q.at(0, 0) == doctest::Approx(-2.0));
    CHECK(q.at(0, 1) == doctest::Approx(1.0));  // full agreement
  }
  SUBCASE("random signs keep the diagonal near the regularizer") {
    std::mt19937_64 rng(2025);
    const int n_samples = 1000;
    std::vector<LabeledSample> big;
    for (int t = 0; t < n_samples; ++t) big.push_back({0, 0, static_cast<int>(rng() % 2)});
    std::vector<std::vector<std::int8_t>> preds(
        3, std::vector<std::int8_t>(static_cast<std::size_t>(n_samples)));
    for (auto& row : preds)
      for (auto& s : row) s = (rng() % 2) ? 1 : -1;
    const double reg = 0.25;
    SymMatrix q = build_boosting(preds, big, reg);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(q.at(i, i) - reg) < 0.2);
  }
  SUBCASE("length mismatches are rejected") {
    std::vector<std::vector<std::int8_t>> preds(1, std::vector<std::int8_t>(3, 1));
    CHECK_THROWS_AS(build_boosting(preds, labels, 0.0), DataError);
  }
}

TEST_CASE("validate reports statistics and rejects broken matrices") {
  SymMatrix q(3);
  q.set_sym(0, 0, -1.0);
  q.set_sym(1, 1, -0.5);
  q.set_sym(2, 2, 0.25);
  q.set_sym(0, 1, 0.1);
  QuboValidationReport r = validate(q);
  CHECK(r.size == 3);
  CHECK(r.min_value == -1.0);
  CHECK(r.max_value == 0.25);
  CHECK(r.diag_mean == doctest::Approx((-1.0 - 0.5 + 0.25) / 3.0));
  CHECK(r.diag_dominance_fraction == 1.0);
  CHECK(validation_report_json(r).find("diag_dominance_fraction") != std::string::npos);

  SUBCASE("nan entries are named") {
    std::vector<double> values{0.0, 1.0, 1.0, std::nan("")};
    CHECK_THROWS_WITH_AS(validate_raw(2, values), doctest::Contains("(1,1)"), DataError);
  }
  SUBCASE("asymmetric entries are named") {
    std::vector<double> values{0.0, 1.0, 2.0, 0.0};
    CHECK_THROWS_WITH_AS(validate_raw(2, values), doctest::Contains("(0,1)"), DataError);
  }
}

TEST_CASE("matrix files round-trip and the triplet export doubles pairs") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / ("qubofs_q_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  SymMatrix q = oracle::random_q(5, 31337);
  const std::string json_path = (dir / "q.json").string();
  save_matrix_json(q, json_path);
  SymMatrix loaded = load_matrix_json(json_path);
  CHECK(loaded == q);

  const std::string triplet_path = (dir / "q.txt").string();
  save_matrix_triplets(q, triplet_path);
  std::ifstream in(triplet_path);
  int i, j;
  double v;
  int lines = 0;
  while (in >> i >> j >> v) {
    ++lines;
    CHECK(i <= j);
    if (i == j)
      CHECK(v == q.at(i, i));
    else
      CHECK(v == 2.0 * q.at(i, j));
  }
  CHECK(lines == 5 + 10);  // all entries nonzero for this ensemble
  fs::remove_all(dir);
}
