#include "qubofs/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "qubofs/sampler_client.hpp"

namespace qubofs {

std::string solver_name(SolverKind k) {
  switch (k) {
    case SolverKind::exhaustive: return "exhaustive";
    case SolverKind::sa: return "sa";
    case SolverKind::tabu: return "tabu";
    case SolverKind::sgd: return "sgd";
    case SolverKind::external_stub: return "external-stub";
  }
  return "?";
}

SolverKind solver_from_name(const std::string& name) {
  if (name == "exhaustive") return SolverKind::exhaustive;
  if (name == "sa") return SolverKind::sa;
  if (name == "tabu" || name == "ts") return SolverKind::tabu;
  if (name == "sgd") return SolverKind::sgd;
  if (name == "external-stub") return SolverKind::external_stub;
  throw ConfigError("unknown solver: " + name);
}

namespace detail {

EnergyTracker::EnergyTracker(const QuboProblem& problem, BitVector start)
    : problem_(problem), bits_(std::move(start)) {
  const int n = problem_.size();
  if (static_cast<int>(bits_.size()) != n) throw DataError("EnergyTracker: start length mismatch");
  field_.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i && bits_[static_cast<std::size_t>(j)]) field_[static_cast<std::size_t>(i)] += problem_.q.at(i, j);
  count_ = popcount(bits_);
  energy_ = recompute_energy();
}

double EnergyTracker::delta_flip(int i) const {
  const double s = bits_[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
  double d = s * (problem_.q.at(i, i) + 2.0 * field_[static_cast<std::size_t>(i)]);
  if (problem_.k) {
    if (std::isinf(problem_.penalty_weight)) {
      const bool feasible_now = count_ == *problem_.k;
      const bool feasible_next = count_ + static_cast<int>(s) == *problem_.k;
      if (feasible_now && !feasible_next) return std::numeric_limits<double>::infinity();
      if (!feasible_now && feasible_next) return -std::numeric_limits<double>::infinity();
      // infeasible -> infeasible: penalty difference treated as 0
    } else {
      d += problem_.penalty_weight * (2.0 * s * (count_ - *problem_.k) + 1.0);
    }
  }
  return d;
}

double EnergyTracker::delta_swap(int on, int off) const {
  // cardinality-preserving: penalty untouched
  return (problem_.q.at(on, on) + 2.0 * field_[static_cast<std::size_t>(on)]) -
         (problem_.q.at(off, off) + 2.0 * field_[static_cast<std::size_t>(off)]) -
         2.0 * problem_.q.at(on, off);
}

void EnergyTracker::apply_flip(int i) {
  const double d = delta_flip(i);
  const double s = bits_[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
  const int n = problem_.size();
  for (int j = 0; j < n; ++j)
    if (j != i) field_[static_cast<std::size_t>(j)] += s * problem_.q.at(i, j);
  bits_[static_cast<std::size_t>(i)] ^= 1;
  count_ += static_cast<int>(s);
  energy_ += d;
}

void EnergyTracker::apply_swap(int on, int off) {
  apply_flip(on);
  apply_flip(off);
}

double EnergyTracker::recompute_energy() const { return energy(problem_, bits_); }

}  // namespace detail

namespace {

using detail::EnergyTracker;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

BitVector random_bits(int n, std::mt19937_64& rng) {
  BitVector bits(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) bits[static_cast<std::size_t>(i)] = (rng() >> 33) & 1;
  return bits;
}

BitVector random_k_hot(int n, int k, std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  BitVector bits(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < std::min(k, n); ++i) bits[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
  return bits;
}

struct Best {
  BitVector bits;
  double energy = std::numeric_limits<double>::infinity();

  // equal-energy ties resolve to the lexicographically smallest vector
  void offer(const BitVector& cand, double e) {
    if (e < energy || (e == energy && (bits.empty() || lex_less(cand, bits)))) {
      energy = e;
      bits = cand;
    }
  }
};

int resolve_steps_per_temp(const SaParams& p, int n) {
  return p.steps_per_temp > 0 ? p.steps_per_temp : std::max(1, 2 * n);
}

// stddev of dY over random flips from a random start; accept-most regime
double estimate_initial_temp(const QuboProblem& problem, std::uint64_t seed) {
  const int n = problem.size();
  std::mt19937_64 rng(derive_seed(seed, "sa-temp"));
  EnergyTracker tracker(problem, random_bits(n, rng));
  std::uniform_int_distribution<int> pick(0, n - 1);
  double sum = 0.0, sum_sq = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const double d = tracker.delta_flip(pick(rng));
    if (!std::isfinite(d)) continue;
    sum += d;
    sum_sq += d * d;
  }
  const double mean = sum / trials;
  const double var = std::max(0.0, sum_sq / trials - mean * mean);
  const double sd = std::sqrt(var);
  return sd > 0.0 ? sd : 1.0;
}

SolveResult finish(SolveResult r, Clock::time_point t0) {
  r.wall_time_s = seconds_since(t0);
  return r;
}

}  // namespace

SolveResult solve_exhaustive(const QuboProblem& problem) {
  const auto t0 = Clock::now();
  const int n = problem.size();
  if (n > 24)
    throw SolverError("solve_exhaustive refuses n=" + std::to_string(n) + " (limit 24)");
  SolveResult result;
  result.solver_tag = "exhaustive";

  Best best;
  BitVector bits(static_cast<std::size_t>(n), 0);
  if (problem.k && std::isinf(problem.penalty_weight)) {
    // enumerate only cardinality-feasible vectors
    const int k = *problem.k;
    if (k < 0 || k > n) throw SolverError("infeasible cardinality k=" + std::to_string(k));
    std::vector<int> chosen(static_cast<std::size_t>(k));
    std::iota(chosen.begin(), chosen.end(), 0);
    for (;;) {
      std::fill(bits.begin(), bits.end(), 0);
      for (int c : chosen) bits[static_cast<std::size_t>(c)] = 1;
      const double e = energy(problem, bits);
      ++result.evaluations;
      best.offer(bits, e);
      // next combination in lexicographic order
      int pos = k - 1;
      while (pos >= 0 && chosen[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
      if (pos < 0) break;
      ++chosen[static_cast<std::size_t>(pos)];
      for (int q = pos + 1; q < k; ++q)
        chosen[static_cast<std::size_t>(q)] = chosen[static_cast<std::size_t>(q - 1)] + 1;
    }
  } else {
    // m's most significant bit maps to x_0, so ascending m is ascending
    // lexicographic order and the first optimum seen wins ties
    const std::uint64_t limit = 1ULL << n;
    for (std::uint64_t m = 0; m < limit; ++m) {
      for (int i = 0; i < n; ++i)
        bits[static_cast<std::size_t>(i)] = (m >> (n - 1 - i)) & 1ULL;
      const double e = energy(problem, bits);
      ++result.evaluations;
      if (e < best.energy) {
        best.energy = e;
        best.bits = bits;
      }
    }
  }
  result.best = best.bits;
  result.best_energy = best.energy;
  return finish(std::move(result), t0);
}

SolveResult solve_sa(const QuboProblem& problem, const SolverConfig& config) {
  const auto t0 = Clock::now();
  const int n = problem.size();
  if (config.sa.cooling <= 0.0 || config.sa.cooling >= 1.0)
    throw ConfigError("sa cooling factor must lie in (0,1)");
  if (config.num_samples < 1) throw ConfigError("num_samples must be >= 1");
  SolveResult result;
  result.solver_tag = "sa";
  if (n == 0) {
    result.best_energy = energy(problem, {});
    return finish(std::move(result), t0);
  }

  const bool swaps = config.sa.swap_moves && problem.k.has_value();
  const double t_initial = config.sa.initial_temp > 0.0
                               ? config.sa.initial_temp
                               : estimate_initial_temp(problem, config.seed);
  const double t_final =
      config.sa.final_temp > 0.0 ? config.sa.final_temp : 1e-3 * t_initial;
  const int steps = resolve_steps_per_temp(config.sa, n);

  Best global;
  for (int restart = 0; restart < config.num_samples; ++restart) {
    std::mt19937_64 rng(derive_seed(config.seed, 0x5a000000ULL + static_cast<std::uint64_t>(restart)));
    BitVector start = swaps ? random_k_hot(n, std::clamp(*problem.k, 0, n), rng) : random_bits(n, rng);
    EnergyTracker tracker(problem, std::move(start));
    Best chain;
    chain.offer(tracker.bits(), tracker.current_energy());

    std::uniform_int_distribution<int> pick(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool swap_possible = swaps && *problem.k > 0 && *problem.k < n;
    for (double temp = t_initial; temp >= t_final; temp *= config.sa.cooling) {
      for (int step = 0; step < steps; ++step) {
        if (swaps) {
          if (!swap_possible) break;
          int on = pick(rng), off = pick(rng);
          while (tracker.bits()[static_cast<std::size_t>(on)]) on = pick(rng);
          while (!tracker.bits()[static_cast<std::size_t>(off)]) off = pick(rng);
          const double d = tracker.delta_swap(on, off);
          ++result.evaluations;
          if (d <= 0.0 || unit(rng) < std::exp(-d / temp)) {
            tracker.apply_swap(on, off);
            chain.offer(tracker.bits(), tracker.current_energy());
          }
        } else {
          const int i = pick(rng);
          const double d = tracker.delta_flip(i);
          ++result.evaluations;
          if (d <= 0.0 || (std::isfinite(d) && unit(rng) < std::exp(-d / temp))) {
            tracker.apply_flip(i);
            chain.offer(tracker.bits(), tracker.current_energy());
          }
        }
      }
    }

    const double exact = energy(problem, chain.bits);
    if (config.record_samples) result.samples.emplace_back(exact, chain.bits);
    global.offer(chain.bits, exact);
  }
  result.best = global.bits;
  result.best_energy = global.energy;
  return finish(std::move(result), t0);
}

SolveResult solve_tabu(const QuboProblem& problem, const SolverConfig& config) {
  const auto t0 = Clock::now();
  const int n = problem.size();
  if (config.num_samples < 1) throw ConfigError("num_samples must be >= 1");
  SolveResult result;
  result.solver_tag = "tabu";
  if (n == 0) {
    result.best_energy = energy(problem, {});
    return finish(std::move(result), t0);
  }
  const int tenure = config.tabu.tenure > 0 ? config.tabu.tenure : (n + 9) / 10 + 3;
  const int max_iters = config.tabu.max_iters > 0 ? config.tabu.max_iters : 25 * n;

  Best global;
  for (int restart = 0; restart < config.num_samples; ++restart) {
    std::mt19937_64 rng(derive_seed(config.seed, 0x7ab00000ULL + static_cast<std::uint64_t>(restart)));
    EnergyTracker tracker(problem, random_bits(n, rng));
    Best incumbent;
    incumbent.offer(tracker.bits(), tracker.current_energy());
    std::vector<std::int64_t> tabu_until(static_cast<std::size_t>(n), -1);

    for (int iter = 0; iter < max_iters; ++iter) {
      int move = -1;
      double move_delta = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        const double d = tracker.delta_flip(i);
        ++result.evaluations;
        if (!std::isfinite(d)) continue;
        const bool is_tabu = tabu_until[static_cast<std::size_t>(i)] > iter;
        const bool aspires = tracker.current_energy() + d < incumbent.energy;
        if (is_tabu && !aspires) continue;
        if (d < move_delta) {  // first minimal index wins ties
          move_delta = d;
          move = i;
        }
      }
      if (move < 0) break;  // every move tabu, none aspires
      tracker.apply_flip(move);
      tabu_until[static_cast<std::size_t>(move)] = iter + tenure;
      incumbent.offer(tracker.bits(), tracker.current_energy());
    }

    const double exact = energy(problem, incumbent.bits);
    if (config.record_samples) result.samples.emplace_back(exact, incumbent.bits);
    global.offer(incumbent.bits, exact);
  }
  result.best = global.bits;
  result.best_energy = global.energy;
  return finish(std::move(result), t0);
}

double relaxed_energy(const QuboProblem& problem, const std::vector<double>& x) {
  const int n = problem.size();
  if (static_cast<int>(x.size()) != n) throw DataError("relaxed_energy: dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      acc += problem.q.at(i, j) * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
  if (problem.k && !std::isinf(problem.penalty_weight)) {
    const double diff = std::accumulate(x.begin(), x.end(), 0.0) - *problem.k;
    acc += problem.penalty_weight * diff * diff;
  }
  return acc;
}

std::vector<double> relaxed_gradient(const QuboProblem& problem, const std::vector<double>& x) {
  const int n = problem.size();
  if (static_cast<int>(x.size()) != n) throw DataError("relaxed_gradient: dimension mismatch");
  std::vector<double> g(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += problem.q.at(i, j) * x[static_cast<std::size_t>(j)];
    g[static_cast<std::size_t>(i)] = 2.0 * acc;
  }
  if (problem.k && !std::isinf(problem.penalty_weight)) {
    const double diff = std::accumulate(x.begin(), x.end(), 0.0) - *problem.k;
    for (double& gi : g) gi += 2.0 * problem.penalty_weight * diff;
  }
  return g;
}

SolveResult solve_sgd(const QuboProblem& problem, const SolverConfig& config) {
  const auto t0 = Clock::now();
  const int n = problem.size();
  if (config.sgd.learning_rate <= 0.0) throw ConfigError("sgd learning_rate must be positive");
  if (config.sgd.iters < 1 || config.sgd.restarts < 1)
    throw ConfigError("sgd iters and restarts must be >= 1");
  SolveResult result;
  result.solver_tag = "sgd";
  if (n == 0) {
    result.best_energy = energy(problem, {});
    return finish(std::move(result), t0);
  }

  Best global;
  for (int restart = 0; restart < config.sgd.restarts; ++restart) {
    std::mt19937_64 rng(derive_seed(config.seed, 0x59d00000ULL + static_cast<std::uint64_t>(restart)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (double& xi : x) xi = unit(rng);

    for (int iter = 0; iter < config.sgd.iters; ++iter) {
      const std::vector<double> g = relaxed_gradient(problem, x);
      ++result.evaluations;
      for (int i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] = std::clamp(
            x[static_cast<std::size_t>(i)] - config.sgd.learning_rate * g[static_cast<std::size_t>(i)], 0.0, 1.0);
    }

    BitVector bits(static_cast<std::size_t>(n), 0);
    if (problem.k) {
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (x[static_cast<std::size_t>(a)] != x[static_cast<std::size_t>(b)])
          return x[static_cast<std::size_t>(a)] > x[static_cast<std::size_t>(b)];
        return a < b;
      });
      for (int i = 0; i < std::min(*problem.k, n); ++i)
        bits[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
    } else {
      for (int i = 0; i < n; ++i) bits[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] > 0.5 ? 1 : 0;
    }
    const double exact = energy(problem, bits);
    if (config.record_samples) result.samples.emplace_back(exact, bits);
    global.offer(bits, exact);
  }
  result.best = global.bits;
  result.best_energy = global.energy;
  return finish(std::move(result), t0);
}

SolveResult solve(const QuboProblem& problem, const SolverConfig& config) {
  switch (config.kind) {
    case SolverKind::exhaustive: return solve_exhaustive(problem);
    case SolverKind::sa: return solve_sa(problem, config);
    case SolverKind::tabu: return solve_tabu(problem, config);
    case SolverKind::sgd: return solve_sgd(problem, config);
    case SolverKind::external_stub: {
      LoopbackStubTransport transport(config);
      return external_sampler_submit(problem, transport);
    }
  }
  throw ConfigError("unknown solver kind");
}

std::vector<StabilityReport> sample_stability(const QuboProblem& problem,
                                              const SolverConfig& config,
                                              const std::vector<int>& sample_counts,
                                              int outer_reps) {
  if (sample_counts.empty()) throw ConfigError("sample_stability: no sample counts");
  if (outer_reps < 1) throw ConfigError("sample_stability: outer_reps must be >= 1");
  if (config.kind == SolverKind::exhaustive)
    throw ConfigError("sample_stability requires a sampling solver");
  int max_count = 0;
  for (int s : sample_counts) {
    if (s < 1) throw ConfigError("sample_stability: sample counts must be >= 1");
    max_count = std::max(max_count, s);
  }

  std::vector<std::vector<double>> mins(sample_counts.size());
  for (int rep = 0; rep < outer_reps; ++rep) {
    SolverConfig cfg = config;
    cfg.seed = derive_seed(config.seed, 0x0a110000ULL + static_cast<std::uint64_t>(rep));
    cfg.num_samples = max_count;
    cfg.sgd.restarts = max_count;
    cfg.record_samples = true;
    const SolveResult res = solve(problem, cfg);
    if (static_cast<int>(res.samples.size()) < max_count)
      throw SolverError("sample_stability: solver returned too few samples");
    // shared sample stream: min over the first s entries, so min energy is
    // exactly nonincreasing in s
    for (std::size_t ci = 0; ci < sample_counts.size(); ++ci) {
      double m = res.samples[0].first;
      for (int t = 1; t < sample_counts[ci]; ++t) m = std::min(m, res.samples[static_cast<std::size_t>(t)].first);
      mins[ci].push_back(m);
    }
  }

  std::vector<StabilityReport> reports;
  for (std::size_t ci = 0; ci < sample_counts.size(); ++ci) {
    StabilityReport rep;
    rep.sample_count = sample_counts[ci];
    rep.sample_energies = mins[ci];
    rep.min = *std::min_element(mins[ci].begin(), mins[ci].end());
    const double mean = std::accumulate(mins[ci].begin(), mins[ci].end(), 0.0) /
                        static_cast<double>(mins[ci].size());
    rep.mean = mean;
    double var = 0.0;
    for (double v : mins[ci]) var += (v - mean) * (v - mean);
    rep.variance = var / static_cast<double>(mins[ci].size());

    const double lo = rep.min;
    const double hi = *std::max_element(mins[ci].begin(), mins[ci].end());
    const int bins = 10;
    rep.histogram_edges.resize(bins + 1);
    rep.histogram_counts.assign(bins, 0);
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    for (int b = 0; b <= bins; ++b) rep.histogram_edges[static_cast<std::size_t>(b)] = lo + width * b;
    for (double v : mins[ci]) {
      int b = static_cast<int>((v - lo) / width);
      b = std::clamp(b, 0, bins - 1);
      ++rep.histogram_counts[static_cast<std::size_t>(b)];
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace qubofs
