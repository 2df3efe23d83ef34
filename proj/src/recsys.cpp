#include "qubofs/recsys.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

namespace qubofs {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split name: " + name);
}

std::string metric_name(const MetricSpec& m) {
  return (m.kind == MetricSpec::Kind::ndcg ? "ndcg@" : "recall@") + std::to_string(m.cutoff);
}

std::string eval_result_json(const EvalResult& result, const MetricSpec& metric) {
  nlohmann::json j;
  j["metric"] = metric_name(metric);
  j["metric_value"] = result.metric_value;
  j["users_evaluated"] = result.users_evaluated;
  j["per_user_values"] = result.per_user_values;
  return j.dump();
}

MetricSpec metric_from_name(const std::string& kind, int cutoff) {
  if (cutoff < 1) throw ConfigError("metric cutoff must be >= 1");
  MetricSpec m;
  m.cutoff = cutoff;
  if (kind == "ndcg")
    m.kind = MetricSpec::Kind::ndcg;
  else if (kind == "recall")
    m.kind = MetricSpec::Kind::recall;
  else
    throw ConfigError("unknown metric kind: " + kind);
  return m;
}

namespace {

struct AdjEntry {
  int other;
  double dot;     // full-feature dot product
  int shared;     // number of co-nonzero features
};

// Item-pair dot products, squared norms and nonzero counts over the full
// feature set. Built once; every masked model is derived from it by
// subtracting the masked columns' contributions.
struct PairwiseStats {
  int num_items = 0;
  std::vector<double> norm2;
  std::vector<int> nnz;
  std::vector<std::vector<AdjEntry>> adj;  // symmetric, other-ascending
};

std::int64_t pair_key(int a, int b) {
  return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

PairwiseStats build_pairwise_stats(const ItemFeatureMatrix& features) {
  PairwiseStats st;
  st.num_items = features.num_items();
  st.norm2.assign(static_cast<std::size_t>(st.num_items), 0.0);
  st.nnz.assign(static_cast<std::size_t>(st.num_items), 0);

  // column-ascending accumulation keeps float sums reproducible
  std::unordered_map<std::int64_t, std::pair<double, int>> dots;
  for (int d = 0; d < features.num_features(); ++d) {
    const auto& col = features.column(d);
    for (std::size_t ia = 0; ia < col.size(); ++ia) {
      auto [a, va] = col[ia];
      st.norm2[static_cast<std::size_t>(a)] += va * va;
      st.nnz[static_cast<std::size_t>(a)] += 1;
      for (std::size_t ib = ia + 1; ib < col.size(); ++ib) {
        auto [b, vb] = col[ib];
        auto& cell = dots[pair_key(a, b)];
        cell.first += va * vb;
        cell.second += 1;
      }
    }
  }

  st.adj.assign(static_cast<std::size_t>(st.num_items), {});
  for (const auto& [key, cell] : dots) {
    int a = static_cast<int>(key >> 32);
    int b = static_cast<int>(key & 0xffffffff);
    st.adj[static_cast<std::size_t>(a)].push_back({b, cell.first, cell.second});
    st.adj[static_cast<std::size_t>(b)].push_back({a, cell.first, cell.second});
  }
  for (auto& list : st.adj)
    std::sort(list.begin(), list.end(),
              [](const AdjEntry& x, const AdjEntry& y) { return x.other < y.other; });
  return st;
}

// keep the n_neighbors largest similarities, ties by lower item index;
// stored item-ascending
NeighborRow select_top_k(std::vector<std::pair<int, double>>& cands, int n_neighbors) {
  auto better = [](const std::pair<int, double>& x, const std::pair<int, double>& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  };
  if (static_cast<int>(cands.size()) > n_neighbors) {
    std::nth_element(cands.begin(), cands.begin() + n_neighbors, cands.end(), better);
    cands.resize(static_cast<std::size_t>(n_neighbors));
  }
  std::sort(cands.begin(), cands.end());
  return cands;
}

NeighborRow derive_row(const PairwiseStats& st, int item, int n_neighbors) {
  std::vector<std::pair<int, double>> cands;
  const double n2a = st.norm2[static_cast<std::size_t>(item)];
  if (n2a <= 0.0) return {};
  for (const AdjEntry& e : st.adj[static_cast<std::size_t>(item)]) {
    const double n2b = st.norm2[static_cast<std::size_t>(e.other)];
    if (n2b <= 0.0) continue;
    cands.emplace_back(e.other, e.dot / std::sqrt(n2a * n2b));
  }
  return select_top_k(cands, n_neighbors);
}

using RowView = std::vector<const NeighborRow*>;

std::vector<int> recommend_rows(const RowView& rows, const InteractionMatrix& train, int user,
                                int cutoff, std::vector<char>& in_profile) {
  const auto& profile = train.items_of(user);
  if (profile.empty()) return {};
  for (int i : profile) in_profile[static_cast<std::size_t>(i)] = 1;

  std::vector<std::pair<int, double>> scored;
  const int num_items = static_cast<int>(rows.size());
  for (int j = 0; j < num_items; ++j) {
    if (in_profile[static_cast<std::size_t>(j)]) continue;
    double score = 0.0;
    for (const auto& [i, w] : *rows[static_cast<std::size_t>(j)])
      if (in_profile[static_cast<std::size_t>(i)]) score += w;
    if (score > 0.0) scored.emplace_back(j, score);
  }
  for (int i : profile) in_profile[static_cast<std::size_t>(i)] = 0;

  auto better = [](const std::pair<int, double>& x, const std::pair<int, double>& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  };
  if (static_cast<int>(scored.size()) > cutoff) {
    std::nth_element(scored.begin(), scored.begin() + cutoff, scored.end(), better);
    scored.resize(static_cast<std::size_t>(cutoff));
  }
  std::sort(scored.begin(), scored.end(), better);

  std::vector<int> out;
  out.reserve(scored.size());
  for (const auto& [j, s] : scored) out.push_back(j);
  return out;
}

EvalResult evaluate_rows(const RowView& rows, const InteractionMatrix& train,
                         const InteractionMatrix& heldout, const MetricSpec& metric) {
  EvalResult result;
  std::vector<char> in_profile(rows.size(), 0);
  std::vector<char> relevant(rows.size(), 0);
  double total = 0.0;
  for (int u = 0; u < heldout.num_users(); ++u) {
    const auto& held = heldout.items_of(u);
    if (held.empty()) continue;
    for (int i : held) relevant[static_cast<std::size_t>(i)] = 1;
    std::vector<int> recs = recommend_rows(rows, train, u, metric.cutoff, in_profile);

    double value = 0.0;
    if (metric.kind == MetricSpec::Kind::ndcg) {
      double dcg = 0.0;
      for (std::size_t r = 0; r < recs.size(); ++r)
        if (relevant[static_cast<std::size_t>(recs[r])])
          dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      double idcg = 0.0;
      const int ideal = std::min<int>(metric.cutoff, static_cast<int>(held.size()));
      for (int r = 1; r <= ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
      value = dcg / idcg;
    } else {
      int hits = 0;
      for (int rec : recs)
        if (relevant[static_cast<std::size_t>(rec)]) ++hits;
      value = static_cast<double>(hits) / static_cast<double>(held.size());
    }
    for (int i : held) relevant[static_cast<std::size_t>(i)] = 0;

    result.per_user_values.push_back(value);
    total += value;
    ++result.users_evaluated;
  }
  result.metric_value = result.users_evaluated > 0 ? total / result.users_evaluated : 0.0;
  return result;
}

RowView rows_of(const ItemKnnModel& model) {
  RowView view(model.rows.size());
  for (std::size_t i = 0; i < model.rows.size(); ++i) view[i] = &model.rows[i];
  return view;
}

}  // namespace

ItemKnnModel train_item_knn(const ItemFeatureMatrix& features, int n_neighbors) {
  if (n_neighbors < 1) throw ConfigError("n_neighbors must be >= 1");
  PairwiseStats st = build_pairwise_stats(features);
  ItemKnnModel model;
  model.num_items = features.num_items();
  model.n_neighbors = n_neighbors;
  model.rows.resize(static_cast<std::size_t>(model.num_items));
  for (int i = 0; i < model.num_items; ++i)
    model.rows[static_cast<std::size_t>(i)] = derive_row(st, i, n_neighbors);
  return model;
}

std::vector<int> recommend(const ItemKnnModel& model, const InteractionMatrix& train, int user,
                           int cutoff) {
  if (user < 0 || user >= train.num_users()) throw DataError("user index out of range");
  if (cutoff < 1) throw ConfigError("cutoff must be >= 1");
  std::vector<char> in_profile(static_cast<std::size_t>(model.num_items), 0);
  return recommend_rows(rows_of(model), train, user, cutoff, in_profile);
}

EvalResult evaluate(const ItemKnnModel& model, const InteractionMatrix& train,
                    const InteractionMatrix& heldout, const MetricSpec& metric) {
  return evaluate_rows(rows_of(model), train, heldout, metric);
}

double evaluate_with_mask(const ItemFeatureMatrix& features, const std::vector<int>& mask,
                          const InteractionMatrix& train, const InteractionMatrix& heldout,
                          const MetricSpec& metric, int n_neighbors) {
  ItemKnnModel model = train_item_knn(features.masked_copy(mask), n_neighbors);
  return evaluate(model, train, heldout, metric).metric_value;
}

struct ItemKnnMaskedEvaluator::Impl {
  ItemFeatureMatrix features;
  InteractionMatrix train;
  InteractionMatrix heldout;
  MetricSpec metric;
  int n_neighbors;
  Split split_tag;
  PairwiseStats stats;
  ItemKnnModel base;
  std::uint64_t fingerprint = 0;
};

ItemKnnMaskedEvaluator::ItemKnnMaskedEvaluator(ItemFeatureMatrix features, InteractionMatrix train,
                                               InteractionMatrix heldout, MetricSpec metric,
                                               int n_neighbors, Split split_tag)
    : impl_(std::make_unique<Impl>()) {
  if (n_neighbors < 1) throw ConfigError("n_neighbors must be >= 1");
  impl_->features = std::move(features);
  impl_->train = std::move(train);
  impl_->heldout = std::move(heldout);
  impl_->metric = metric;
  impl_->n_neighbors = n_neighbors;
  impl_->split_tag = split_tag;
  impl_->stats = build_pairwise_stats(impl_->features);
  impl_->base.num_items = impl_->features.num_items();
  impl_->base.n_neighbors = n_neighbors;
  impl_->base.rows.resize(static_cast<std::size_t>(impl_->base.num_items));
  for (int i = 0; i < impl_->base.num_items; ++i)
    impl_->base.rows[static_cast<std::size_t>(i)] = derive_row(impl_->stats, i, n_neighbors);

  Fingerprint fp;
  impl_->features.fingerprint(fp);
  impl_->train.fingerprint(fp);
  impl_->heldout.fingerprint(fp);
  fp.add(metric_name(metric));
  fp.add(n_neighbors);
  fp.add(split_name(split_tag));
  impl_->fingerprint = fp.value();
}

ItemKnnMaskedEvaluator::ItemKnnMaskedEvaluator(ItemKnnMaskedEvaluator&&) noexcept = default;
ItemKnnMaskedEvaluator& ItemKnnMaskedEvaluator::operator=(ItemKnnMaskedEvaluator&&) noexcept =
    default;
ItemKnnMaskedEvaluator::~ItemKnnMaskedEvaluator() = default;

int ItemKnnMaskedEvaluator::num_features() const { return impl_->features.num_features(); }
MetricSpec ItemKnnMaskedEvaluator::metric() const { return impl_->metric; }
Split ItemKnnMaskedEvaluator::evaluation_split() const { return impl_->split_tag; }
std::uint64_t ItemKnnMaskedEvaluator::input_fingerprint() const { return impl_->fingerprint; }
const ItemFeatureMatrix& ItemKnnMaskedEvaluator::features() const { return impl_->features; }
const InteractionMatrix& ItemKnnMaskedEvaluator::train_split() const { return impl_->train; }
const InteractionMatrix& ItemKnnMaskedEvaluator::heldout_split() const { return impl_->heldout; }
int ItemKnnMaskedEvaluator::n_neighbors() const { return impl_->n_neighbors; }
const ItemKnnModel& ItemKnnMaskedEvaluator::base_model() const { return impl_->base; }

double ItemKnnMaskedEvaluator::metric_with_mask(const std::vector<int>& mask_in) const {
  const Impl& im = *impl_;
  std::vector<int> mask = mask_in;
  std::sort(mask.begin(), mask.end());
  mask.erase(std::unique(mask.begin(), mask.end()), mask.end());
  for (int f : mask)
    if (f < 0 || f >= im.features.num_features())
      throw DataError("mask index " + std::to_string(f) + " out of range");

  auto finish = [](const EvalResult& r) {
    if (r.users_evaluated == 0) throw DataError("no evaluable users");
    return r.metric_value;
  };

  if (mask.empty()) return finish(evaluate_rows(rows_of(im.base), im.train, im.heldout, im.metric));

  const int n = im.stats.num_items;
  std::vector<char> touched(static_cast<std::size_t>(n), 0);
  std::vector<double> norm2_delta(static_cast<std::size_t>(n), 0.0);
  std::vector<int> nnz_delta(static_cast<std::size_t>(n), 0);
  std::unordered_map<std::int64_t, std::pair<double, int>> corr;
  for (int d : mask) {
    const auto& col = im.features.column(d);
    for (std::size_t ia = 0; ia < col.size(); ++ia) {
      auto [a, va] = col[ia];
      touched[static_cast<std::size_t>(a)] = 1;
      norm2_delta[static_cast<std::size_t>(a)] += va * va;
      nnz_delta[static_cast<std::size_t>(a)] += 1;
      for (std::size_t ib = ia + 1; ib < col.size(); ++ib) {
        auto [b, vb] = col[ib];
        auto& cell = corr[pair_key(std::min(a, b), std::max(a, b))];
        cell.first += va * vb;
        cell.second += 1;
      }
    }
  }

  // rows needing a rebuild: touched items and their co-support neighbors
  // (a touched endpoint changes a pair's cosine through its norm)
  std::vector<char> rebuild(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    if (touched[static_cast<std::size_t>(i)]) {
      rebuild[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    for (const AdjEntry& e : im.stats.adj[static_cast<std::size_t>(i)])
      if (touched[static_cast<std::size_t>(e.other)]) {
        rebuild[static_cast<std::size_t>(i)] = 1;
        break;
      }
  }

  std::vector<NeighborRow> local_rows;
  local_rows.reserve(static_cast<std::size_t>(n));  // view holds pointers; must never reallocate
  RowView view(static_cast<std::size_t>(n));
  std::vector<std::pair<int, double>> cands;
  for (int r = 0; r < n; ++r) {
    if (!rebuild[static_cast<std::size_t>(r)]) {
      view[static_cast<std::size_t>(r)] = &im.base.rows[static_cast<std::size_t>(r)];
      continue;
    }
    local_rows.emplace_back();
    NeighborRow& row = local_rows.back();
    const int nnz_r = im.stats.nnz[static_cast<std::size_t>(r)] - nnz_delta[static_cast<std::size_t>(r)];
    const double n2r = im.stats.norm2[static_cast<std::size_t>(r)] - norm2_delta[static_cast<std::size_t>(r)];
    if (nnz_r > 0 && n2r > 0.0) {
      cands.clear();
      for (const AdjEntry& e : im.stats.adj[static_cast<std::size_t>(r)]) {
        const int c = e.other;
        const int nnz_c = im.stats.nnz[static_cast<std::size_t>(c)] - nnz_delta[static_cast<std::size_t>(c)];
        if (nnz_c == 0) continue;
        double dot = e.dot;
        int shared = e.shared;
        auto it = corr.find(pair_key(std::min(r, c), std::max(r, c)));
        if (it != corr.end()) {
          // all co-nonzero features masked -> the pair vanishes exactly
          if (it->second.second == shared) continue;
          dot -= it->second.first;
          shared -= it->second.second;
        }
        const double n2c = im.stats.norm2[static_cast<std::size_t>(c)] - norm2_delta[static_cast<std::size_t>(c)];
        if (n2c <= 0.0) continue;
        cands.emplace_back(c, dot / std::sqrt(n2r * n2c));
      }
      row = select_top_k(cands, im.n_neighbors);
    }
    view[static_cast<std::size_t>(r)] = &row;
  }

  return finish(evaluate_rows(view, im.train, im.heldout, im.metric));
}

std::vector<std::vector<std::int8_t>> single_feature_sign_predictions(
    const ItemFeatureMatrix& features, const InteractionMatrix& train,
    const std::vector<LabeledSample>& samples, int n_neighbors) {
  if (samples.empty()) throw DataError("no labeled samples");
  const int num_features = features.num_features();
  std::vector<std::vector<std::int8_t>> predictions(
      static_cast<std::size_t>(num_features),
      std::vector<std::int8_t>(samples.size(), -1));

  std::vector<char> in_profile(static_cast<std::size_t>(features.num_items()), 0);
  for (int f = 0; f < num_features; ++f) {
    ItemKnnModel model = train_item_knn(features.restricted_to({f}), n_neighbors);
    std::vector<double> scores(samples.size(), 0.0);
    for (std::size_t t = 0; t < samples.size(); ++t) {
      const auto& profile = train.items_of(samples[t].user);
      for (int i : profile) in_profile[static_cast<std::size_t>(i)] = 1;
      double score = 0.0;
      for (const auto& [i, w] : model.rows[static_cast<std::size_t>(samples[t].item)])
        if (in_profile[static_cast<std::size_t>(i)]) score += w;
      for (int i : profile) in_profile[static_cast<std::size_t>(i)] = 0;
      scores[t] = score;
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double median = (m % 2 == 1) ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    for (std::size_t t = 0; t < samples.size(); ++t)
      predictions[static_cast<std::size_t>(f)][t] = scores[t] > median ? 1 : -1;
  }
  return predictions;
}

}  // namespace qubofs
