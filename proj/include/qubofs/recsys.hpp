#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qubofs/dataset.hpp"

namespace qubofs {

enum class Split { train, validation, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct MetricSpec {
  enum class Kind { ndcg, recall };
  Kind kind = Kind::ndcg;
  int cutoff = 10;
};

std::string metric_name(const MetricSpec& m);
MetricSpec metric_from_name(const std::string& kind, int cutoff);

struct EvalResult {
  double metric_value = 0.0;              // mean over evaluated users
  std::vector<double> per_user_values;    // one entry per evaluated user, user-ascending
  int users_evaluated = 0;
};

std::string eval_result_json(const EvalResult& result, const MetricSpec& metric);

using NeighborRow = std::vector<std::pair<int, double>>;  // (item, similarity), item-ascending

// Item-KNN model: per-item top-n cosine neighbors over the item feature
// vectors. Truncation is part of the model; masked evaluation re-derives
// it from masked similarities.
struct ItemKnnModel {
  int num_items = 0;
  int n_neighbors = 0;
  std::vector<NeighborRow> rows;
};

// Cosine similarity between all item pairs sharing at least one nonzero
// feature; per-row top-n_neighbors kept, ties broken by lower item index.
ItemKnnModel train_item_knn(const ItemFeatureMatrix& features, int n_neighbors);

// score(j) = sum of similarity(j, i) over the user's train profile;
// profile items excluded; descending score, ties by lower item index;
// only positive-score items are returned.
std::vector<int> recommend(const ItemKnnModel& model, const InteractionMatrix& train, int user,
                           int cutoff);

// nDCG@N (binary relevance, log2 positional discount) or Recall@N
// (denominator = heldout count, uncapped). Users without heldout items
// are excluded from the mean.
EvalResult evaluate(const ItemKnnModel& model, const InteractionMatrix& train,
                    const InteractionMatrix& heldout, const MetricSpec& metric);

// Full-recomputation reference path: zero the masked columns, retrain,
// evaluate. evaluate_with_mask({}) is bit-identical to evaluate().
double evaluate_with_mask(const ItemFeatureMatrix& features, const std::vector<int>& mask,
                          const InteractionMatrix& train, const InteractionMatrix& heldout,
                          const MetricSpec& metric, int n_neighbors);

// The evaluator contract the counterfactual engine consumes: any base
// model exposes exactly (mask of feature indices) -> metric value.
// Implementations must be pure and safe to call from many threads.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double metric_with_mask(const std::vector<int>& mask) const = 0;
  virtual int num_features() const = 0;
  virtual MetricSpec metric() const = 0;
  virtual Split evaluation_split() const = 0;
  virtual std::uint64_t input_fingerprint() const = 0;
};

// Item-KNN evaluator with an incremental masked-similarity path: zeroing
// feature column d only perturbs rows of items whose vectors touch d (their
// norms change) and pair dots among them, so per-mask work is proportional
// to the masked columns' support instead of the full pairwise computation.
// Value-equal (within float cancellation, well under 1e-12 for sane data)
// to retraining from the masked matrix; bit-identical for the empty mask.
// Caveat: when two similarities tie exactly in real arithmetic (e.g.
// proportional item vectors), the top-n boundary may resolve differently
// here than in a full retrain, since the two routes round differently.
class ItemKnnMaskedEvaluator : public Evaluator {
 public:
  ItemKnnMaskedEvaluator(ItemFeatureMatrix features, InteractionMatrix train,
                         InteractionMatrix heldout, MetricSpec metric, int n_neighbors,
                         Split split_tag);
  ItemKnnMaskedEvaluator(ItemKnnMaskedEvaluator&&) noexcept;
  ItemKnnMaskedEvaluator& operator=(ItemKnnMaskedEvaluator&&) noexcept;
  ~ItemKnnMaskedEvaluator() override;

  double metric_with_mask(const std::vector<int>& mask) const override;
  int num_features() const override;
  MetricSpec metric() const override;
  Split evaluation_split() const override;
  std::uint64_t input_fingerprint() const override;

  const ItemFeatureMatrix& features() const;
  const InteractionMatrix& train_split() const;
  const InteractionMatrix& heldout_split() const;
  int n_neighbors() const;
  const ItemKnnModel& base_model() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Sign predictions of per-feature weak models: each feature trains a
// single-column Item-KNN, scores every labeled sample and thresholds at
// that feature's median score. Returns S[feature][sample] in {-1,+1}.
std::vector<std::vector<std::int8_t>> single_feature_sign_predictions(
    const ItemFeatureMatrix& features, const InteractionMatrix& train,
    const std::vector<LabeledSample>& samples, int n_neighbors);

}  // namespace qubofs
