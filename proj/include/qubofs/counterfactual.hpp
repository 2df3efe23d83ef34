#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qubofs/matrix.hpp"
#include "qubofs/recsys.hpp"

namespace qubofs {

enum class PairMode { comb, indiv };

std::string pair_mode_name(PairMode m);
PairMode pair_mode_from_name(const std::string& name);

// Per-feature and per-pair performance deltas against a trained base
// model. Positive values mean the metric dropped when the feature(s)
// were masked.
struct CounterfactualProfile {
  double baseline = 0.0;        // metric with the full feature set
  std::vector<double> singles;  // singles[i]: baseline - metric with {i} masked
  SymMatrix pairs;              // pairs(i,j): baseline - metric with {i,j} masked; zero diagonal
  MetricSpec metric;
  Split evaluation_split = Split::validation;
  PairMode mode = PairMode::comb;
  std::uint64_t input_checksum = 0;

  int num_features() const { return static_cast<int>(singles.size()); }
};

struct ProfileOptions {
  PairMode mode = PairMode::comb;
  int num_threads = 0;               // 0 -> hardware_concurrency, capped at 8
  std::string checkpoint_path;       // empty -> no checkpointing
  int checkpoint_every = 0;          // completed evaluations per flush; 0 -> auto
};

// metric value with the empty mask; throws if the evaluator has no
// evaluable users
double compute_baseline(const Evaluator& evaluator);

// one masked evaluation per feature
std::vector<double> compute_singles(const Evaluator& evaluator, double baseline);

// one masked evaluation per unordered pair; result mirrored
SymMatrix compute_pairs(const Evaluator& evaluator, double baseline);

// Full profile. Evaluations are partitioned into independent tasks and
// merged by index, so results are identical for any thread count. With a
// checkpoint path the profile is flushed incrementally and a matching
// (same input checksum) partial file is resumed instead of recomputed.
CounterfactualProfile compute_profile(const Evaluator& evaluator, const ProfileOptions& options);

void save_profile(const CounterfactualProfile& profile, const std::string& path);
CounterfactualProfile load_profile(const std::string& path);

}  // namespace qubofs
