#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <json.hpp>

#include "oracles.hpp"
#include "qubofs/counterfactual.hpp"

using namespace qubofs;

namespace {

// evaluator over a fixed table of metric values; counts calls
class TableEvaluator : public Evaluator {
 public:
  TableEvaluator(int num_features, double baseline, std::vector<double> single_values,
                 SymMatrix pair_values)
      : num_features_(num_features),
        baseline_(baseline),
        singles_(std::move(single_values)),
        pairs_(std::move(pair_values)) {}

  double metric_with_mask(const std::vector<int>& mask) const override {
    ++calls_;
    if (mask.empty()) return baseline_;
    if (mask.size() == 1) return singles_[static_cast<std::size_t>(mask[0])];
    if (mask.size() == 2) return pairs_.at(mask[0], mask[1]);
    FAIL("unexpected mask size");
    return 0.0;
  }
  int num_features() const override { return num_features_; }
  MetricSpec metric() const override { return MetricSpec{MetricSpec::Kind::ndcg, 10}; }
  Split evaluation_split() const override { return Split::validation; }
  std::uint64_t input_fingerprint() const override { return 0xabcdef; }
  int calls() const { return calls_; }

 private:
  int num_features_;
  double baseline_;
  std::vector<double> singles_;
  SymMatrix pairs_;
  mutable std::atomic<int> calls_{0};
};

ItemKnnMaskedEvaluator make_evaluator(const oracle::RandomCorpus& corpus, int n_neighbors) {
  return ItemKnnMaskedEvaluator(corpus.features, corpus.train, corpus.heldout,
                                MetricSpec{MetricSpec::Kind::ndcg, 4}, n_neighbors,
                                Split::validation);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  nlohmann::json parsed;
  f >> parsed;
  return parsed;
}

}  // namespace

TEST_CASE("compute_baseline is pure and errors without evaluable users") {
  auto corpus = oracle::random_corpus(5, 8, 6, 0.5, 31, 3);
  auto evaluator = make_evaluator(corpus, 4);
  const double a = compute_baseline(evaluator);
  const double b = compute_baseline(evaluator);
  CHECK(a == b);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);

  InteractionMatrix empty_heldout = InteractionMatrix::from_pairs(5, 8, {});
  ItemKnnMaskedEvaluator degenerate(corpus.features, corpus.train, empty_heldout,
                                    MetricSpec{MetricSpec::Kind::ndcg, 4}, 4, Split::validation);
  CHECK_THROWS_WITH_AS(compute_baseline(degenerate), doctest::Contains("no evaluable users"),
                       DataError);
}

TEST_CASE("singles and pairs match a from-scratch retrain oracle within 1e-12") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto corpus = oracle::random_corpus(4, 5 + static_cast<int>(seed % 4),
                                        5 + static_cast<int>(seed % 2), 0.6, 800 + seed, 4);
    const int nn = 3;
    auto evaluator = make_evaluator(corpus, nn);
    const MetricSpec metric{MetricSpec::Kind::ndcg, 4};
    const double baseline = compute_baseline(evaluator);
    CHECK(baseline ==
          doctest::Approx(oracle::brute_metric(corpus.features, {}, corpus.train, corpus.heldout,
                                               metric, nn))
              .epsilon(1e-12));

    const std::vector<double> singles = compute_singles(evaluator, baseline);
    const int nf = corpus.features.num_features();
    for (int i = 0; i < nf; ++i) {
      const double expected =
          baseline - oracle::brute_metric(corpus.features, {i}, corpus.train, corpus.heldout,
                                          metric, nn);
      CHECK(singles[static_cast<std::size_t>(i)] == doctest::Approx(expected).epsilon(1e-12));
    }

    const SymMatrix pairs = compute_pairs(evaluator, baseline);
    for (int i = 0; i < nf; ++i)
      for (int j = i + 1; j < nf; ++j) {
        const double expected =
            baseline - oracle::brute_metric(corpus.features, {i, j}, corpus.train, corpus.heldout,
                                            metric, nn);
        CHECK(pairs.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(pairs.at(i, j) == pairs.at(j, i));
      }
  }
}

TEST_CASE("masking an all-zero column leaves every E value at zero") {
  // feature 4 has no entries anywhere
  ItemFeatureMatrix f(4, 5,
                      {{0, 0, 1.0}, {0, 1, 0.5}, {1, 0, 0.8}, {1, 2, 0.3},
                       {2, 2, 1.0}, {2, 3, 0.7}, {3, 3, 1.1}, {3, 0, 0.4}});
  InteractionMatrix train = InteractionMatrix::from_pairs(2, 4, {{0, 0}, {1, 2}});
  InteractionMatrix held = InteractionMatrix::from_pairs(2, 4, {{0, 1}, {1, 3}});
  ItemKnnMaskedEvaluator evaluator(f, train, held, MetricSpec{MetricSpec::Kind::ndcg, 3}, 3,
                                   Split::validation);
  const double baseline = compute_baseline(evaluator);
  const std::vector<double> singles = compute_singles(evaluator, baseline);
  CHECK(singles[4] == 0.0);
  const SymMatrix pairs = compute_pairs(evaluator, baseline);
  for (int i = 0; i < 4; ++i) CHECK(pairs.at(i, 4) == singles[static_cast<std::size_t>(i)]);
}

TEST_CASE("compute_profile modes and evaluation counts") {
  const int nf = 10;
  std::vector<double> single_values(static_cast<std::size_t>(nf), 0.4);
  SymMatrix pair_values(nf);
  for (int i = 0; i < nf; ++i)
    for (int j = i + 1; j < nf; ++j) pair_values.set_sym(i, j, 0.3);
  TableEvaluator evaluator(nf, 0.5, single_values, pair_values);

  SUBCASE("comb runs exactly 10 + 45 masked evaluations beyond baseline") {
    ProfileOptions options;
    options.mode = PairMode::comb;
    options.num_threads = 1;
    CounterfactualProfile profile = compute_profile(evaluator, options);
    CHECK(evaluator.calls() == 1 + 10 + 45);
    CHECK(profile.baseline == 0.5);
    for (double e : profile.singles) CHECK(e == doctest::Approx(0.1));
    CHECK(profile.pairs.at(2, 7) == doctest::Approx(0.2));
    CHECK(profile.mode == PairMode::comb);
  }
  SUBCASE("indiv zeroes the pairs and skips their evaluations") {
    ProfileOptions options;
    options.mode = PairMode::indiv;
    options.num_threads = 1;
    CounterfactualProfile profile = compute_profile(evaluator, options);
    CHECK(evaluator.calls() == 1 + 10);
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < nf; ++j) CHECK(profile.pairs.at(i, j) == 0.0);
    CHECK(profile.mode == PairMode::indiv);
  }
  SUBCASE("comb and indiv agree on the singles vector") {
    ProfileOptions comb{PairMode::comb, 1, "", 0};
    ProfileOptions indiv{PairMode::indiv, 1, "", 0};
    CHECK(compute_profile(evaluator, comb).singles == compute_profile(evaluator, indiv).singles);
  }
}

TEST_CASE("profiles are deterministic under concurrency") {
  auto corpus = oracle::random_corpus(5, 9, 7, 0.5, 99, 3);
  auto evaluator = make_evaluator(corpus, 4);
  ProfileOptions serial{PairMode::comb, 1, "", 0};
  ProfileOptions parallel{PairMode::comb, 4, "", 0};
  CounterfactualProfile a = compute_profile(evaluator, serial);
  CounterfactualProfile b = compute_profile(evaluator, parallel);
  CHECK(a.baseline == b.baseline);
  CHECK(a.singles == b.singles);
  CHECK(a.pairs == b.pairs);
  CHECK(a.input_checksum == b.input_checksum);
}

TEST_CASE("profile json round trip and checkpoint resume") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / ("qubofs_cf_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto corpus = oracle::random_corpus(5, 8, 6, 0.5, 123, 3);
  auto evaluator = make_evaluator(corpus, 4);

  ProfileOptions options{PairMode::comb, 2, (dir / "ckpt.json").string(), 4};
  CounterfactualProfile fresh = compute_profile(evaluator, options);

  SUBCASE("save/load round trip") {
    save_profile(fresh, (dir / "profile.json").string());
    CounterfactualProfile loaded = load_profile((dir / "profile.json").string());
    CHECK(loaded.baseline == fresh.baseline);
    CHECK(loaded.singles == fresh.singles);
    CHECK(loaded.pairs == fresh.pairs);
    CHECK(loaded.input_checksum == fresh.input_checksum);
    CHECK(loaded.evaluation_split == fresh.evaluation_split);
    CHECK(loaded.mode == fresh.mode);
  }

  SUBCASE("a partial checkpoint resumes to the same profile") {
    // punch holes into the completed checkpoint
    nlohmann::json j = read_json(options.checkpoint_path);
    j["singles"][2] = nullptr;
    j["pairs"][5] = nullptr;
    {
      std::ofstream out(options.checkpoint_path);
      out << j.dump();
    }
    CounterfactualProfile resumed = compute_profile(evaluator, options);
    CHECK(resumed.singles == fresh.singles);
    CHECK(resumed.pairs == fresh.pairs);
    // the checkpoint file is complete again
    CounterfactualProfile from_disk = load_profile(options.checkpoint_path);
    CHECK(from_disk.singles == fresh.singles);
  }

  SUBCASE("a checkpoint from different inputs is ignored") {
    auto other_corpus = oracle::random_corpus(5, 8, 6, 0.5, 124, 3);
    auto other = make_evaluator(other_corpus, 4);
    ProfileOptions other_options{PairMode::comb, 2, options.checkpoint_path, 4};
    CounterfactualProfile recomputed = compute_profile(other, other_options);
    CHECK(recomputed.input_checksum != fresh.input_checksum);
    CHECK(recomputed.singles.size() == fresh.singles.size());
  }

  SUBCASE("incomplete files are rejected by load_profile") {
    nlohmann::json j = read_json(options.checkpoint_path);
    j["singles"][0] = nullptr;
    const auto partial = (dir / "partial.json").string();
    {
      std::ofstream out(partial);
      out << j.dump();
    }
    CHECK_THROWS_WITH_AS(load_profile(partial), doctest::Contains("incomplete"), DataError);
  }

  fs::remove_all(dir);
}

TEST_CASE("pure-noise corpora produce near-zero deltas") {
  SynthParams p;
  p.num_users = 40;
  p.num_items = 60;
  p.num_features = 10;
  p.num_informative = 0;
  p.sparsity = 0.6;
  p.seed = 3;
  DatasetBundle bundle = synthesize_corpus(p);
  ItemKnnMaskedEvaluator evaluator(bundle.features, bundle.train, bundle.validation,
                                   MetricSpec{MetricSpec::Kind::ndcg, 10}, 100, Split::validation);
  const double baseline = compute_baseline(evaluator);
  const std::vector<double> singles = compute_singles(evaluator, baseline);
  double mean = 0.0;
  for (double e : singles) mean += e;
  mean /= static_cast<double>(singles.size());
  CHECK(std::abs(mean) < 0.05);
}
