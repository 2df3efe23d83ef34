#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qubofs/qubo.hpp"

namespace qubofs {

enum class SolverKind { exhaustive, sa, tabu, sgd, external_stub };

std::string solver_name(SolverKind k);
SolverKind solver_from_name(const std::string& name);

struct SaParams {
  double initial_temp = 0.0;   // <= 0: stddev of dY over 100 random flips
  double cooling = 0.95;       // geometric factor per temperature level
  int steps_per_temp = 0;      // <= 0: 2n
  double final_temp = 0.0;     // <= 0: 1e-3 * initial_temp
  bool swap_moves = false;     // cardinality-preserving 1<->0 swaps (needs k)
};

struct TabuParams {
  int tenure = 0;     // <= 0: ceil(n/10) + 3
  int max_iters = 0;  // <= 0: 25n
};

struct SgdParams {
  double learning_rate = 0.05;
  int iters = 400;
  int restarts = 20;
};

struct SolverConfig {
  SolverKind kind = SolverKind::sa;
  std::uint64_t seed = 0;
  int num_samples = 2000;  // independent restarts for sa/tabu
  bool record_samples = false;
  SaParams sa;
  TabuParams tabu;
  SgdParams sgd;
};

struct SolveResult {
  BitVector best;
  double best_energy = 0.0;  // always an exact recomputation for `best`
  std::vector<std::pair<double, BitVector>> samples;  // per-restart bests, when recorded
  double wall_time_s = 0.0;
  std::uint64_t evaluations = 0;  // move/gradient evaluations
  std::string solver_tag;
};

struct StabilityReport {
  int sample_count = 0;
  std::vector<double> sample_energies;  // one min-energy per outer repetition
  double min = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> histogram_edges;  // bin edges, size bins+1
  std::vector<int> histogram_counts;
};

// Ground-truth oracle; enumerates all 2^n vectors (or only the (n choose k)
// cardinality-feasible ones when penalty_weight is infinite). Refuses
// n > 24. Equal-energy ties resolve to the lexicographically smallest
// vector.
SolveResult solve_exhaustive(const QuboProblem& problem);

// Single-bit-flip Metropolis chain with geometric cooling; num_samples
// independent restarts with derived seeds; best over restarts.
SolveResult solve_sa(const QuboProblem& problem, const SolverConfig& config);

// Steepest descent over the 1-flip neighborhood with a recency tabu list
// and aspiration on global improvement.
SolveResult solve_tabu(const QuboProblem& problem, const SolverConfig& config);

// Projected gradient descent on the [0,1]^n relaxation followed by top-k
// (or 0.5-threshold) rounding; best rounded solution over restarts.
SolveResult solve_sgd(const QuboProblem& problem, const SolverConfig& config);

SolveResult solve(const QuboProblem& problem, const SolverConfig& config);

// Relaxed objective and its gradient on x in [0,1]^n:
// Y(x) = x^T Q x + w (sum x - k)^2, grad = 2 Q x + 2 w (sum x - k) 1.
double relaxed_energy(const QuboProblem& problem, const std::vector<double>& x);
std::vector<double> relaxed_gradient(const QuboProblem& problem, const std::vector<double>& x);

// For each requested sample count s, runs `outer_reps` repetitions and
// records the distribution of min-energy over the first s samples of each
// repetition. Sample streams are shared across counts (prefix property),
// so min energy is exactly nonincreasing in s.
std::vector<StabilityReport> sample_stability(const QuboProblem& problem,
                                              const SolverConfig& config,
                                              const std::vector<int>& sample_counts,
                                              int outer_reps);

namespace detail {

// Incremental energy bookkeeping for single-flip and swap moves; all
// solver chains route through this so delta computations are O(1) per
// proposal and O(n) per accepted move.
class EnergyTracker {
 public:
  EnergyTracker(const QuboProblem& problem, BitVector start);

  double current_energy() const { return energy_; }
  const BitVector& bits() const { return bits_; }
  double delta_flip(int i) const;
  double delta_swap(int on, int off) const;  // on: 0->1, off: 1->0
  void apply_flip(int i);
  void apply_swap(int on, int off);
  double recompute_energy() const;  // exact, for drift checks

 private:
  const QuboProblem& problem_;
  BitVector bits_;
  std::vector<double> field_;  // field_[i] = sum_j!=i Q_ij x_j
  int count_ = 0;
  double energy_ = 0.0;
};

}  // namespace detail

}  // namespace qubofs
