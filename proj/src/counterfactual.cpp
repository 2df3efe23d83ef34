#include "qubofs/counterfactual.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace qubofs {

namespace {

std::size_t upper_index(int i, int j, int n) {
  // row-major upper triangle, diagonal excluded; requires i < j
  return static_cast<std::size_t>(i) * n - static_cast<std::size_t>(i) * (i + 1) / 2 + (j - i - 1);
}

std::string checksum_hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

nlohmann::json profile_to_json(const CounterfactualProfile& p,
                               const std::vector<char>* single_done,
                               const std::vector<char>* pair_done) {
  nlohmann::json j;
  j["baseline"] = p.baseline;
  j["metric"] = p.metric.kind == MetricSpec::Kind::ndcg ? "ndcg" : "recall";
  j["cutoff"] = p.metric.cutoff;
  j["split"] = split_name(p.evaluation_split);
  j["mode"] = pair_mode_name(p.mode);
  j["num_features"] = p.num_features();
  j["checksum"] = checksum_hex(p.input_checksum);
  nlohmann::json singles = nlohmann::json::array();
  for (int i = 0; i < p.num_features(); ++i) {
    if (single_done && !(*single_done)[static_cast<std::size_t>(i)])
      singles.push_back(nullptr);
    else
      singles.push_back(p.singles[static_cast<std::size_t>(i)]);
  }
  j["singles"] = std::move(singles);
  nlohmann::json pairs = nlohmann::json::array();
  const int n = p.num_features();
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) {
      if (pair_done && !(*pair_done)[upper_index(i, k, n)])
        pairs.push_back(nullptr);
      else
        pairs.push_back(p.pairs.at(i, k));
    }
  j["pairs"] = std::move(pairs);
  return j;
}

void write_json_atomic(const nlohmann::json& j, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write " + tmp);
    out << j.dump() << "\n";
  }
  std::filesystem::rename(tmp, path);
}

struct Task {
  int i;
  int j;  // -1 for a single-feature mask
};

}  // namespace

std::string pair_mode_name(PairMode m) { return m == PairMode::comb ? "comb" : "indiv"; }

PairMode pair_mode_from_name(const std::string& name) {
  if (name == "comb") return PairMode::comb;
  if (name == "indiv") return PairMode::indiv;
  throw ConfigError("unknown pair mode: " + name);
}

double compute_baseline(const Evaluator& evaluator) { return evaluator.metric_with_mask({}); }

std::vector<double> compute_singles(const Evaluator& evaluator, double baseline) {
  const int n = evaluator.num_features();
  std::vector<double> singles(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    singles[static_cast<std::size_t>(i)] = baseline - evaluator.metric_with_mask({i});
  return singles;
}

SymMatrix compute_pairs(const Evaluator& evaluator, double baseline) {
  const int n = evaluator.num_features();
  SymMatrix pairs(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      pairs.set_sym(i, j, baseline - evaluator.metric_with_mask({i, j}));
  return pairs;
}

CounterfactualProfile compute_profile(const Evaluator& evaluator, const ProfileOptions& options) {
  const int n = evaluator.num_features();
  CounterfactualProfile profile;
  profile.metric = evaluator.metric();
  profile.evaluation_split = evaluator.evaluation_split();
  profile.mode = options.mode;
  profile.input_checksum = evaluator.input_fingerprint();
  profile.singles.assign(static_cast<std::size_t>(n), 0.0);
  profile.pairs = SymMatrix(n);
  profile.baseline = compute_baseline(evaluator);

  // indiv mode keeps the (all-zero) pairs marked done so they serialize
  // as values, not checkpoint holes
  const std::size_t num_pairs = static_cast<std::size_t>(n) * (n - 1) / 2;
  std::vector<char> single_done(static_cast<std::size_t>(n), 0);
  std::vector<char> pair_done(num_pairs, options.mode == PairMode::comb ? 0 : 1);

  // resume from a matching checkpoint
  const bool checkpointing = !options.checkpoint_path.empty();
  if (checkpointing && std::filesystem::exists(options.checkpoint_path)) {
    try {
      std::ifstream in(options.checkpoint_path);
      nlohmann::json j;
      in >> j;
      const bool compatible = j.at("checksum").get<std::string>() == checksum_hex(profile.input_checksum) &&
                              j.at("num_features").get<int>() == n &&
                              j.at("mode").get<std::string>() == pair_mode_name(options.mode) &&
                              std::abs(j.at("baseline").get<double>() - profile.baseline) == 0.0;
      if (compatible) {
        const auto& js = j.at("singles");
        for (int i = 0; i < n; ++i)
          if (!js.at(static_cast<std::size_t>(i)).is_null()) {
            profile.singles[static_cast<std::size_t>(i)] = js.at(static_cast<std::size_t>(i)).get<double>();
            single_done[static_cast<std::size_t>(i)] = 1;
          }
        const auto& jp = j.at("pairs");
        std::size_t idx = 0;
        for (int i = 0; i < n && options.mode == PairMode::comb; ++i)
          for (int k = i + 1; k < n; ++k, ++idx)
            if (!jp.at(idx).is_null()) {
              profile.pairs.set_sym(i, k, jp.at(idx).get<double>());
              pair_done[idx] = 1;
            }
        log_info("resumed profile checkpoint from " + options.checkpoint_path);
      } else {
        log_warn("checkpoint " + options.checkpoint_path + " does not match inputs; recomputing");
      }
    } catch (const std::exception& e) {
      log_warn(std::string("unreadable checkpoint ignored: ") + e.what());
    }
  }

  std::vector<Task> pending;
  for (int i = 0; i < n; ++i)
    if (!single_done[static_cast<std::size_t>(i)]) pending.push_back({i, -1});
  if (options.mode == PairMode::comb)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (!pair_done[upper_index(i, j, n)]) pending.push_back({i, j});

  int num_threads = options.num_threads;
  if (num_threads <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    num_threads = hw == 0 ? 1 : static_cast<int>(std::min(hw, 8u));
  }
  const std::size_t wave_size =
      options.checkpoint_every > 0
          ? static_cast<std::size_t>(options.checkpoint_every)
          : std::max<std::size_t>(32, (pending.size() + 19) / 20);

  std::size_t wave_begin = 0;
  while (wave_begin < pending.size()) {
    const std::size_t wave_end = std::min(pending.size(), wave_begin + wave_size);
    std::atomic<std::size_t> next{wave_begin};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&]() {
      for (;;) {
        const std::size_t idx = next.fetch_add(1);
        if (idx >= wave_end) return;
        const Task& t = pending[idx];
        try {
          if (t.j < 0) {
            profile.singles[static_cast<std::size_t>(t.i)] =
                profile.baseline - evaluator.metric_with_mask({t.i});
            single_done[static_cast<std::size_t>(t.i)] = 1;
          } else {
            profile.pairs.set_sym(t.i, t.j,
                                  profile.baseline - evaluator.metric_with_mask({t.i, t.j}));
            pair_done[upper_index(t.i, t.j, n)] = 1;
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    };

    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(num_threads), wave_end - wave_begin));
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    if (checkpointing)
      write_json_atomic(profile_to_json(profile, &single_done, &pair_done), options.checkpoint_path);
    wave_begin = wave_end;
  }

  return profile;
}

void save_profile(const CounterfactualProfile& profile, const std::string& path) {
  write_json_atomic(profile_to_json(profile, nullptr, nullptr), path);
}

CounterfactualProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profile: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("profile parse error in " + path + ": " + e.what());
  }
  CounterfactualProfile p;
  p.baseline = j.at("baseline").get<double>();
  p.metric = metric_from_name(j.at("metric").get<std::string>(), j.at("cutoff").get<int>());
  p.evaluation_split = split_from_name(j.at("split").get<std::string>());
  p.mode = pair_mode_from_name(j.value("mode", "comb"));
  const int n = j.at("num_features").get<int>();
  p.input_checksum = std::stoull(j.at("checksum").get<std::string>(), nullptr, 16);
  const auto& js = j.at("singles");
  if (static_cast<int>(js.size()) != n) throw DataError("profile singles length mismatch");
  p.singles.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (js.at(static_cast<std::size_t>(i)).is_null())
      throw DataError("profile " + path + " is an incomplete checkpoint");
    p.singles[static_cast<std::size_t>(i)] = js.at(static_cast<std::size_t>(i)).get<double>();
  }
  p.pairs = SymMatrix(n);
  const auto& jp = j.at("pairs");
  if (jp.size() != static_cast<std::size_t>(n) * (n - 1) / 2)
    throw DataError("profile pairs length mismatch");
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k, ++idx) {
      if (jp.at(idx).is_null()) throw DataError("profile " + path + " is an incomplete checkpoint");
      p.pairs.set_sym(i, k, jp.at(idx).get<double>());
    }
  return p;
}

}  // namespace qubofs
