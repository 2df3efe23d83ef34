#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qubofs/common.hpp"

namespace qubofs {

// Maps external string identifiers onto contiguous zero-based indices,
// in first-appearance order. Retained for reporting.
class IdMap {
 public:
  int add_or_get(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(names_.size());
    index_.emplace(name, id);
    names_.push_back(name);
    return id;
  }
  std::optional<int> lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& name(int id) const { return names_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(names_.size()); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// Sparse binary user x item interaction matrix. Entries are unique and
// per-user item lists are kept sorted; the structure is immutable after
// construction and safe to share across threads.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  // Validates bounds, sorts and rejects duplicates.
  static InteractionMatrix from_pairs(int num_users, int num_items,
                                      std::vector<std::pair<int, int>> pairs);

  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  std::size_t num_entries() const { return num_entries_; }
  const std::vector<int>& items_of(int user) const { return user_items_[static_cast<std::size_t>(user)]; }
  bool has(int user, int item) const;
  std::vector<std::pair<int, int>> all_pairs() const;

  void fingerprint(Fingerprint& fp) const;

 private:
  int num_users_ = 0;
  int num_items_ = 0;
  std::size_t num_entries_ = 0;
  std::vector<std::vector<int>> user_items_;
};

struct Triplet {
  int item;
  int feature;
  double value;
};

// Sparse item x feature matrix with real values; zeros are implicit and
// stored values must be finite and nonzero. Column (per-feature) support
// lists are precomputed because masking works feature-column-wise.
class ItemFeatureMatrix {
 public:
  ItemFeatureMatrix() = default;
  ItemFeatureMatrix(int num_items, int num_features, std::vector<Triplet> triplets);

  int num_items() const { return num_items_; }
  int num_features() const { return num_features_; }
  std::size_t nnz() const { return triplets_.size(); }
  double sparsity() const;

  // Sorted by (item, feature).
  const std::vector<Triplet>& triplets() const { return triplets_; }
  // Row of one item: (feature, value) pairs, feature-ascending.
  const std::vector<std::pair<int, double>>& row(int item) const {
    return rows_[static_cast<std::size_t>(item)];
  }
  // Support of one feature column: (item, value) pairs, item-ascending.
  const std::vector<std::pair<int, double>>& column(int feature) const {
    return cols_[static_cast<std::size_t>(feature)];
  }

  // Copy with the given feature columns zeroed (removed).
  ItemFeatureMatrix masked_copy(const std::vector<int>& masked_features) const;
  // Copy keeping only the given feature columns (indices unchanged).
  ItemFeatureMatrix restricted_to(const std::vector<int>& selected_features) const;

  void fingerprint(Fingerprint& fp) const;

 private:
  int num_items_ = 0;
  int num_features_ = 0;
  std::vector<Triplet> triplets_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
  std::vector<std::vector<std::pair<int, double>>> cols_;
};

struct SplitSpec {
  double test_fraction = 0.2;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SplitResult {
  InteractionMatrix train;
  InteractionMatrix validation;
  InteractionMatrix test;
};

// Sidecar metadata for synthetic corpora; informative_features enables
// recovery-rate tests.
struct CorpusManifest {
  int num_users = 0;
  int num_items = 0;
  int num_features = 0;
  int num_informative = 0;
  double requested_sparsity = 0.0;
  double realized_sparsity = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> informative_features;
};

struct DatasetBundle {
  InteractionMatrix train;
  InteractionMatrix validation;
  InteractionMatrix test;
  ItemFeatureMatrix features;
  std::optional<CorpusManifest> manifest;
};

struct InteractionsLoad {
  InteractionMatrix matrix;
  IdMap users;
  IdMap items;
  std::size_t duplicate_rows = 0;
};

struct FeaturesLoad {
  ItemFeatureMatrix matrix;
  IdMap features;
  std::size_t zero_values_dropped = 0;
};

struct LabeledSample {
  int user;
  int item;
  int label;  // 1 = observed interaction, 0 = sampled negative
};

// CSV `user_id,item_id` with a header line. Duplicate rows are collapsed
// and counted; ids are reindexed contiguously in first-appearance order.
InteractionsLoad load_interactions(const std::string& path);

// CSV `item_id,feature_id,value` with a header line. Item ids must resolve
// through the interaction id map; items absent from the file keep all-zero
// rows. Explicit zeros are dropped (and counted), duplicates are an error.
FeaturesLoad load_features(const std::string& path, const IdMap& items);

// Per-user stratified holdout: ceil(test_fraction * n_u) interactions per
// user to test, then validation carved from the remainder the same way.
// Users with a single interaction stay entirely in train. Deterministic
// under spec.seed regardless of thread count or platform.
SplitResult split(const InteractionMatrix& interactions, const SplitSpec& spec);

// Emits every positive with label 1 plus `ratio` uniformly sampled
// non-interacted items per positive with label 0 (without replacement
// within one positive). Users interacting with every item contribute
// positives only (warned).
std::vector<LabeledSample> negative_sample(const InteractionMatrix& interactions, int ratio,
                                           std::uint64_t seed);

struct SynthParams {
  int num_users = 50;
  int num_items = 100;
  int num_features = 20;
  int num_informative = 5;
  double sparsity = 0.8;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double validation_fraction = 0.2;
};

// Planted-signal generator: every item carries one informative "topic"
// feature, users prefer one topic, and interactions are drawn
// proportionally to the preferred column's values. Non-informative
// features are filled with noise up to the requested sparsity. With
// num_informative == 0 the corpus is pure noise.
DatasetBundle synthesize_corpus(const SynthParams& params);

// Corpus file writers used by the `synth` subcommand; round-trip through
// load_interactions / load_features.
void write_interactions_csv(const InteractionMatrix& m, const std::string& path);
void write_features_csv(const ItemFeatureMatrix& m, const std::string& path);
void write_manifest_json(const CorpusManifest& m, const std::string& path);
CorpusManifest read_manifest_json(const std::string& path);

}  // namespace qubofs
