#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qubofs/counterfactual.hpp"
#include "qubofs/dataset.hpp"
#include "qubofs/matrix.hpp"

namespace qubofs {

// Symmetric coefficient matrix plus an optional cardinality target. When k
// is absent the penalty term is omitted entirely (the solver decides how
// many variables to set). penalty_weight = +infinity means hard constraint
// (infeasible vectors get infinite energy).
struct QuboProblem {
  SymMatrix q;
  std::optional<int> k;
  double penalty_weight = 1.0;

  int size() const { return q.size(); }
};

// Y = x^T Q x + w * (sum(x) - k)^2 under the symmetric convention: a
// selected off-diagonal pair contributes Q_ij + Q_ji = 2*Q_ij.
double energy(const QuboProblem& problem, const BitVector& x);

// builders ------------------------------------------------------------

// Q_ii = -E_i, Q_ij = -E_ij. Profiles computed in indiv mode yield a
// diagonal-only matrix. With pair_counted_once the off-diagonal is halved
// so each selected pair contributes -E_ij once instead of twice
// (sensitivity-study variant; default off).
SymMatrix build_pdqubo(const CounterfactualProfile& profile, bool pair_counted_once = false);

// Q_ii = -I(f_i; y), Q_ij = -(I(f_i;y|f_j) + I(f_j;y|f_i))/2 over
// binarized features (nonzero -> 1); plug-in estimates in nats, zero-count
// cells contribute 0.
SymMatrix build_miqubo(const ItemFeatureMatrix& features, const std::vector<LabeledSample>& labels);

// Q_ii = -|pearson(f_i, y)| on raw feature values, Q_ij = +|pearson(f_i, f_j)|
// (redundancy penalty); zero-variance columns map to 0.
SymMatrix build_coqubo(const ItemFeatureMatrix& features, const std::vector<LabeledSample>& labels);

// QBoost-style matrix from per-feature weak predictions s in {-1,+1}:
// Q_ii = regularizer - (2/N) * sum_t s_i(t) y(t), Q_ij = (1/N) * sum_t s_i(t) s_j(t).
SymMatrix build_boosting(const std::vector<std::vector<std::int8_t>>& predictions,
                         const std::vector<LabeledSample>& labels, double regularizer);

// validation ----------------------------------------------------------

struct QuboValidationReport {
  int size = 0;
  double min_value = 0.0;
  double max_value = 0.0;
  double diag_min = 0.0;
  double diag_max = 0.0;
  double diag_mean = 0.0;
  double offdiag_mean_abs = 0.0;
  // fraction of rows with |Q_ii| >= sum_j!=i |Q_ij|
  double diag_dominance_fraction = 0.0;
};

// Throws DataError naming the offending cell for non-finite entries or
// asymmetry beyond 1e-12. The raw overload checks an arbitrary row-major
// square array (e.g. externally produced matrices before adoption).
QuboValidationReport validate(const SymMatrix& q);
QuboValidationReport validate_raw(int size, const std::vector<double>& row_major);

std::string validation_report_json(const QuboValidationReport& r);

// matrix files ----------------------------------------------------------

// JSON {size, format:"dense-sym", values: row-major lower triangle incl. diagonal}
void save_matrix_json(const SymMatrix& q, const std::string& path);
SymMatrix load_matrix_json(const std::string& path);

// Plain-text triplets `i j value` (i <= j). Off-diagonal lines carry the
// full pair coefficient 2*Q_ij so samplers that count each pair once
// minimize the identical energy; exact zeros are omitted.
void save_matrix_triplets(const SymMatrix& q, const std::string& path);

}  // namespace qubofs
