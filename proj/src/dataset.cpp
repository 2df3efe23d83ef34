#include "qubofs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace qubofs {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

// ceil(frac * m) with a guard against carrying the whole pool away and
// against float noise like 0.2 * 10 -> 2.0000000000000004.
int carve_count(int m, double frac) {
  if (m <= 1) return 0;
  int c = static_cast<int>(std::ceil(frac * m - 1e-9));
  if (c < 0) c = 0;
  if (c > m - 1) c = m - 1;
  return c;
}

}  // namespace

InteractionMatrix InteractionMatrix::from_pairs(int num_users, int num_items,
                                                std::vector<std::pair<int, int>> pairs) {
  InteractionMatrix m;
  m.num_users_ = num_users;
  m.num_items_ = num_items;
  m.user_items_.assign(static_cast<std::size_t>(num_users), {});
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto [u, v] = pairs[i];
    if (u < 0 || u >= num_users || v < 0 || v >= num_items)
      throw DataError("interaction (" + std::to_string(u) + "," + std::to_string(v) +
                      ") out of bounds");
    if (i > 0 && pairs[i] == pairs[i - 1])
      throw DataError("duplicate interaction (" + std::to_string(u) + "," + std::to_string(v) + ")");
    m.user_items_[static_cast<std::size_t>(u)].push_back(v);
  }
  m.num_entries_ = pairs.size();
  return m;
}

bool InteractionMatrix::has(int user, int item) const {
  const auto& items = user_items_[static_cast<std::size_t>(user)];
  return std::binary_search(items.begin(), items.end(), item);
}

std::vector<std::pair<int, int>> InteractionMatrix::all_pairs() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(num_entries_);
  for (int u = 0; u < num_users_; ++u)
    for (int v : user_items_[static_cast<std::size_t>(u)]) out.emplace_back(u, v);
  return out;
}

void InteractionMatrix::fingerprint(Fingerprint& fp) const {
  fp.add(num_users_);
  fp.add(num_items_);
  for (int u = 0; u < num_users_; ++u)
    for (int v : user_items_[static_cast<std::size_t>(u)]) {
      fp.add(u);
      fp.add(v);
    }
}

ItemFeatureMatrix::ItemFeatureMatrix(int num_items, int num_features, std::vector<Triplet> triplets)
    : num_items_(num_items), num_features_(num_features), triplets_(std::move(triplets)) {
  std::sort(triplets_.begin(), triplets_.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.item, a.feature) < std::tie(b.item, b.feature);
  });
  rows_.assign(static_cast<std::size_t>(num_items_), {});
  cols_.assign(static_cast<std::size_t>(num_features_), {});
  for (std::size_t i = 0; i < triplets_.size(); ++i) {
    const Triplet& t = triplets_[i];
    if (t.item < 0 || t.item >= num_items_ || t.feature < 0 || t.feature >= num_features_)
      throw DataError("feature cell (" + std::to_string(t.item) + "," + std::to_string(t.feature) +
                      ") out of bounds");
    if (!std::isfinite(t.value))
      throw DataError("non-finite feature value at (" + std::to_string(t.item) + "," +
                      std::to_string(t.feature) + ")");
    if (t.value == 0.0)
      throw DataError("explicit zero stored at (" + std::to_string(t.item) + "," +
                      std::to_string(t.feature) + "); zeros must be implicit");
    if (i > 0 && triplets_[i - 1].item == t.item && triplets_[i - 1].feature == t.feature)
      throw DataError("duplicate feature cell (" + std::to_string(t.item) + "," +
                      std::to_string(t.feature) + ")");
    rows_[static_cast<std::size_t>(t.item)].emplace_back(t.feature, t.value);
    cols_[static_cast<std::size_t>(t.feature)].emplace_back(t.item, t.value);
  }
}

double ItemFeatureMatrix::sparsity() const {
  double cells = static_cast<double>(num_items_) * num_features_;
  if (cells == 0.0) return 1.0;
  return 1.0 - static_cast<double>(triplets_.size()) / cells;
}

ItemFeatureMatrix ItemFeatureMatrix::masked_copy(const std::vector<int>& masked_features) const {
  std::vector<char> masked(static_cast<std::size_t>(num_features_), 0);
  for (int f : masked_features) {
    if (f < 0 || f >= num_features_)
      throw DataError("mask index " + std::to_string(f) + " out of range");
    masked[static_cast<std::size_t>(f)] = 1;
  }
  std::vector<Triplet> kept;
  kept.reserve(triplets_.size());
  for (const Triplet& t : triplets_)
    if (!masked[static_cast<std::size_t>(t.feature)]) kept.push_back(t);
  return ItemFeatureMatrix(num_items_, num_features_, std::move(kept));
}

ItemFeatureMatrix ItemFeatureMatrix::restricted_to(const std::vector<int>& selected_features) const {
  std::vector<char> keep(static_cast<std::size_t>(num_features_), 0);
  for (int f : selected_features) {
    if (f < 0 || f >= num_features_)
      throw DataError("selected feature index " + std::to_string(f) + " out of range");
    keep[static_cast<std::size_t>(f)] = 1;
  }
  std::vector<int> mask;
  for (int f = 0; f < num_features_; ++f)
    if (!keep[static_cast<std::size_t>(f)]) mask.push_back(f);
  return masked_copy(mask);
}

void ItemFeatureMatrix::fingerprint(Fingerprint& fp) const {
  fp.add(num_items_);
  fp.add(num_features_);
  for (const Triplet& t : triplets_) {
    fp.add(t.item);
    fp.add(t.feature);
    fp.add(t.value);
  }
}

InteractionsLoad load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interactions file: " + path);

  InteractionsLoad out;
  std::vector<std::pair<int, int>> pairs;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::unordered_map<std::int64_t, char> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!header_seen) {
      header_seen = true;  // first line is the header
      continue;
    }
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw DataError("interactions parse error at line " + std::to_string(line_no) +
                      ": expected `user_id,item_id`, got \"" + line + "\"");
    int u = out.users.add_or_get(fields[0]);
    int v = out.items.add_or_get(fields[1]);
    std::int64_t key = (static_cast<std::int64_t>(u) << 32) | static_cast<std::uint32_t>(v);
    if (!seen.emplace(key, 1).second) {
      ++out.duplicate_rows;
      continue;
    }
    pairs.emplace_back(u, v);
  }
  if (!header_seen || pairs.empty()) throw DataError("empty dataset: " + path);
  if (out.duplicate_rows > 0)
    log_warn(std::to_string(out.duplicate_rows) + " duplicate interaction rows collapsed in " + path);
  out.matrix = InteractionMatrix::from_pairs(out.users.size(), out.items.size(), std::move(pairs));
  return out;
}

namespace {

// purely numeric feature ids double as explicit column indices, which
// keeps empty columns addressable and preserves index-based metadata
bool is_plain_index(const std::string& s) {
  if (s.empty() || s.size() > 9) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

}  // namespace

FeaturesLoad load_features(const std::string& path, const IdMap& items) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open features file: " + path);

  FeaturesLoad out;
  struct RawCell {
    std::string feature_id;
    int item;
    double value;
  };
  std::vector<RawCell> cells;
  bool all_numeric = true;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
      throw DataError("features parse error at line " + std::to_string(line_no) +
                      ": expected `item_id,feature_id,value`, got \"" + line + "\"");
    auto item = items.lookup(fields[0]);
    if (!item)
      throw DataError("features line " + std::to_string(line_no) + ": unknown item id \"" +
                      fields[0] + "\"");
    double value = 0.0;
    try {
      std::size_t pos = 0;
      value = std::stod(fields[2], &pos);
      if (pos != fields[2].size()) throw std::invalid_argument("trailing garbage");
    } catch (const std::exception&) {
      throw DataError("features parse error at line " + std::to_string(line_no) +
                      ": bad value \"" + fields[2] + "\"");
    }
    if (!std::isfinite(value))
      throw DataError("features parse error at line " + std::to_string(line_no) +
                      ": non-finite value \"" + fields[2] + "\"");
    if (value == 0.0) {
      ++out.zero_values_dropped;
      continue;
    }
    all_numeric = all_numeric && is_plain_index(fields[1]);
    cells.push_back(RawCell{fields[1], *item, value});
  }

  std::vector<Triplet> triplets;
  triplets.reserve(cells.size());
  int num_features = 0;
  if (all_numeric) {
    for (const RawCell& c : cells) {
      const int f = std::stoi(c.feature_id);
      num_features = std::max(num_features, f + 1);
      out.features.add_or_get(c.feature_id);
      triplets.push_back(Triplet{c.item, f, c.value});
    }
  } else {
    for (const RawCell& c : cells)
      triplets.push_back(Triplet{c.item, out.features.add_or_get(c.feature_id), c.value});
    num_features = out.features.size();
  }
  out.matrix = ItemFeatureMatrix(items.size(), num_features, std::move(triplets));
  return out;
}

SplitResult split(const InteractionMatrix& interactions, const SplitSpec& spec) {
  if (spec.test_fraction <= 0.0 || spec.test_fraction >= 1.0 ||
      spec.validation_fraction <= 0.0 || spec.validation_fraction >= 1.0)
    throw ConfigError("split fractions must lie strictly between 0 and 1");

  std::vector<std::pair<int, int>> train_pairs, val_pairs, test_pairs;
  for (int u = 0; u < interactions.num_users(); ++u) {
    std::vector<int> items = interactions.items_of(u);
    // per-user stream, independent of user iteration order
    std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(u) + 0x5eedULL));
    std::shuffle(items.begin(), items.end(), rng);

    int n = static_cast<int>(items.size());
    int n_test = carve_count(n, spec.test_fraction);
    int n_val = carve_count(n - n_test, spec.validation_fraction);
    for (int i = 0; i < n; ++i) {
      if (i < n_test)
        test_pairs.emplace_back(u, items[static_cast<std::size_t>(i)]);
      else if (i < n_test + n_val)
        val_pairs.emplace_back(u, items[static_cast<std::size_t>(i)]);
      else
        train_pairs.emplace_back(u, items[static_cast<std::size_t>(i)]);
    }
  }
  SplitResult out;
  out.train = InteractionMatrix::from_pairs(interactions.num_users(), interactions.num_items(),
                                            std::move(train_pairs));
  out.validation = InteractionMatrix::from_pairs(interactions.num_users(), interactions.num_items(),
                                                 std::move(val_pairs));
  out.test = InteractionMatrix::from_pairs(interactions.num_users(), interactions.num_items(),
                                           std::move(test_pairs));
  return out;
}

std::vector<LabeledSample> negative_sample(const InteractionMatrix& interactions, int ratio,
                                           std::uint64_t seed) {
  if (ratio < 1) throw ConfigError("negative sampling ratio must be >= 1");
  const int num_items = interactions.num_items();
  std::vector<LabeledSample> out;
  std::size_t all_items_users = 0;
  for (int u = 0; u < interactions.num_users(); ++u) {
    const std::vector<int>& profile = interactions.items_of(u);
    if (profile.empty()) continue;
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(u) + 0xae5ULL));
    const int available = num_items - static_cast<int>(profile.size());
    if (available == 0) {
      ++all_items_users;
      for (int item : profile) out.push_back({u, item, 1});
      continue;
    }
    std::uniform_int_distribution<int> pick(0, num_items - 1);
    for (int item : profile) {
      out.push_back({u, item, 1});
      std::vector<int> negatives;
      int want = std::min(ratio, available);
      while (static_cast<int>(negatives.size()) < want) {
        int cand = pick(rng);
        if (interactions.has(u, cand)) continue;
        if (std::find(negatives.begin(), negatives.end(), cand) != negatives.end()) continue;
        negatives.push_back(cand);
      }
      for (int cand : negatives) out.push_back({u, cand, 0});
    }
  }
  if (all_items_users > 0)
    log_warn(std::to_string(all_items_users) +
             " user(s) interact with every item; negatives skipped for them");
  return out;
}

DatasetBundle synthesize_corpus(const SynthParams& p) {
  if (p.num_users <= 0 || p.num_items <= 0 || p.num_features <= 0)
    throw ConfigError("synthesize_corpus: sizes must be positive");
  if (p.num_informative < 0 || p.num_informative > p.num_features)
    throw ConfigError("synthesize_corpus: num_informative must lie in [0, num_features]");
  if (p.sparsity < 0.0 || p.sparsity >= 1.0)
    throw ConfigError("synthesize_corpus: sparsity must lie in [0, 1)");

  std::mt19937_64 rng(derive_seed(p.seed, "synth"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto target_nnz = static_cast<std::int64_t>(
      std::llround((1.0 - p.sparsity) * static_cast<double>(p.num_items) * p.num_features));
  if (p.num_informative > 0 &&
      (target_nnz < p.num_informative || p.num_items < p.num_informative))
    throw DataError("infeasible sparsity: informative feature columns would be empty");

  // informative feature subset
  std::vector<int> informative;
  if (p.num_informative > 0) {
    std::vector<int> all(static_cast<std::size_t>(p.num_features));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    informative.assign(all.begin(), all.begin() + p.num_informative);
    std::sort(informative.begin(), informative.end());
  }

  std::vector<Triplet> triplets;
  std::int64_t placed = 0;
  if (!informative.empty()) {
    // one topic value per item, topics balanced round-robin so every
    // informative column carries a comparable share of the signal
    for (int i = 0; i < p.num_items; ++i) {
      const int t = informative[static_cast<std::size_t>(i % p.num_informative)];
      triplets.push_back(Triplet{i, t, 1.0 + 0.5 * unit(rng)});
      ++placed;
    }
  }

  // noise cells on the remaining (non-informative) columns
  std::vector<int> noise_features;
  {
    std::vector<char> is_informative(static_cast<std::size_t>(p.num_features), 0);
    for (int f : informative) is_informative[static_cast<std::size_t>(f)] = 1;
    for (int f = 0; f < p.num_features; ++f)
      if (!is_informative[static_cast<std::size_t>(f)]) noise_features.push_back(f);
  }
  std::int64_t budget = target_nnz - placed;
  const std::int64_t noise_cells =
      static_cast<std::int64_t>(p.num_items) * static_cast<std::int64_t>(noise_features.size());
  if (budget > noise_cells) budget = noise_cells;
  if (budget > 0 && !noise_features.empty()) {
    std::vector<char> used(static_cast<std::size_t>(noise_cells), 0);
    std::uniform_int_distribution<std::int64_t> pick(0, noise_cells - 1);
    std::int64_t filled = 0;
    while (filled < budget) {
      std::int64_t cell = pick(rng);
      if (used[static_cast<std::size_t>(cell)]) continue;
      used[static_cast<std::size_t>(cell)] = 1;
      int item = static_cast<int>(cell / static_cast<std::int64_t>(noise_features.size()));
      int feat = noise_features[static_cast<std::size_t>(cell % static_cast<std::int64_t>(noise_features.size()))];
      triplets.push_back(Triplet{item, feat, 0.2 + 0.6 * unit(rng)});
      ++filled;
    }
  }

  ItemFeatureMatrix features(p.num_items, p.num_features, std::move(triplets));

  // users: one preferred topic (balanced round-robin); interactions drawn
  // without replacement, weighted by the preferred column plus a small
  // flat exploration term
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < p.num_users; ++u) {
    std::mt19937_64 urng(derive_seed(derive_seed(p.seed, "user"), static_cast<std::uint64_t>(u)));
    int n_u = 15 + static_cast<int>(urng() % 11);
    n_u = std::min(n_u, p.num_items);
    std::vector<double> weight(static_cast<std::size_t>(p.num_items), 0.05);
    if (!informative.empty()) {
      const int topic = informative[static_cast<std::size_t>(u % p.num_informative)];
      for (const auto& [item, value] : features.column(topic))
        weight[static_cast<std::size_t>(item)] += value;
    }
    for (int draw = 0; draw < n_u; ++draw) {
      double total = std::accumulate(weight.begin(), weight.end(), 0.0);
      double r = std::uniform_real_distribution<double>(0.0, total)(urng);
      int chosen = p.num_items - 1;
      double acc = 0.0;
      for (int i = 0; i < p.num_items; ++i) {
        acc += weight[static_cast<std::size_t>(i)];
        if (r < acc) {
          chosen = i;
          break;
        }
      }
      // the last seen item with nonzero weight wins when r lands on the tail
      while (weight[static_cast<std::size_t>(chosen)] == 0.0 && chosen > 0) --chosen;
      pairs.emplace_back(u, chosen);
      weight[static_cast<std::size_t>(chosen)] = 0.0;
    }
  }

  InteractionMatrix interactions =
      InteractionMatrix::from_pairs(p.num_users, p.num_items, std::move(pairs));
  SplitResult splits = split(interactions, SplitSpec{p.test_fraction, p.validation_fraction,
                                                     derive_seed(p.seed, "split")});

  DatasetBundle bundle;
  bundle.train = std::move(splits.train);
  bundle.validation = std::move(splits.validation);
  bundle.test = std::move(splits.test);
  bundle.features = std::move(features);
  CorpusManifest manifest;
  manifest.num_users = p.num_users;
  manifest.num_items = p.num_items;
  manifest.num_features = p.num_features;
  manifest.num_informative = p.num_informative;
  manifest.requested_sparsity = p.sparsity;
  manifest.realized_sparsity = bundle.features.sparsity();
  manifest.seed = p.seed;
  manifest.informative_features = informative;
  bundle.manifest = std::move(manifest);
  return bundle;
}

void write_interactions_csv(const InteractionMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "user_id,item_id\n";
  for (int u = 0; u < m.num_users(); ++u)
    for (int v : m.items_of(u)) out << u << "," << v << "\n";
}

void write_features_csv(const ItemFeatureMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  out << "item_id,feature_id,value\n";
  for (const Triplet& t : m.triplets())
    out << t.item << "," << t.feature << "," << t.value << "\n";
}

void write_manifest_json(const CorpusManifest& m, const std::string& path) {
  nlohmann::json j;
  j["num_users"] = m.num_users;
  j["num_items"] = m.num_items;
  j["num_features"] = m.num_features;
  j["num_informative"] = m.num_informative;
  j["requested_sparsity"] = m.requested_sparsity;
  j["realized_sparsity"] = m.realized_sparsity;
  j["seed"] = m.seed;
  j["informative_features"] = m.informative_features;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

CorpusManifest read_manifest_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  nlohmann::json j;
  in >> j;
  CorpusManifest m;
  m.num_users = j.at("num_users").get<int>();
  m.num_items = j.at("num_items").get<int>();
  m.num_features = j.at("num_features").get<int>();
  m.num_informative = j.at("num_informative").get<int>();
  m.requested_sparsity = j.at("requested_sparsity").get<double>();
  m.realized_sparsity = j.at("realized_sparsity").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.informative_features = j.at("informative_features").get<std::vector<int>>();
  return m;
}

}  // namespace qubofs
