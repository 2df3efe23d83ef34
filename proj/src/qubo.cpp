#include "qubofs/qubo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace qubofs {

double energy(const QuboProblem& problem, const BitVector& x) {
  const int n = problem.size();
  if (static_cast<int>(x.size()) != n)
    throw DataError("energy: solution length " + std::to_string(x.size()) +
                    " does not match problem size " + std::to_string(n));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!x[static_cast<std::size_t>(i)]) continue;
    acc += problem.q.at(i, i);
    for (int j = i + 1; j < n; ++j)
      if (x[static_cast<std::size_t>(j)]) acc += 2.0 * problem.q.at(i, j);
  }
  if (problem.k) {
    const int count = popcount(x);
    if (std::isinf(problem.penalty_weight)) {
      if (count != *problem.k) return std::numeric_limits<double>::infinity();
    } else {
      const double diff = static_cast<double>(count - *problem.k);
      acc += problem.penalty_weight * diff * diff;
    }
  }
  return acc;
}

SymMatrix build_pdqubo(const CounterfactualProfile& profile, bool pair_counted_once) {
  const int n = profile.num_features();
  SymMatrix q(n);
  for (int i = 0; i < n; ++i) q.set_sym(i, i, -profile.singles[static_cast<std::size_t>(i)]);
  const double scale = pair_counted_once ? 0.5 : 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) q.set_sym(i, j, -profile.pairs.at(i, j) * scale);
  return q;
}

namespace {

// plug-in mutual information in nats from a 2x2 count table
double table_mi(const double c[2][2], double total) {
  if (total <= 0.0) return 0.0;
  double marg_a[2] = {c[0][0] + c[0][1], c[1][0] + c[1][1]};
  double marg_y[2] = {c[0][0] + c[1][0], c[0][1] + c[1][1]};
  double mi = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) {
      if (c[a][y] <= 0.0) continue;
      const double pxy = c[a][y] / total;
      const double px = marg_a[a] / total;
      const double py = marg_y[y] / total;
      mi += pxy * std::log(pxy / (px * py));
    }
  return mi;
}

}  // namespace

SymMatrix build_miqubo(const ItemFeatureMatrix& features, const std::vector<LabeledSample>& labels) {
  if (labels.empty()) throw DataError("build_miqubo: no labeled samples");
  const int nf = features.num_features();
  const std::size_t ns = labels.size();

  bool any_pos = false, any_neg = false;
  for (const LabeledSample& s : labels) (s.label ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw DataError("uninformative labels: all samples share one label");

  // binarized feature columns over the samples
  std::vector<std::vector<std::uint8_t>> bin(static_cast<std::size_t>(nf),
                                             std::vector<std::uint8_t>(ns, 0));
  std::vector<std::uint8_t> y(ns);
  for (std::size_t t = 0; t < ns; ++t) {
    y[t] = labels[t].label ? 1 : 0;
    for (const auto& [f, v] : features.row(labels[t].item))
      bin[static_cast<std::size_t>(f)][t] = 1;
  }

  SymMatrix q(nf);
  for (int i = 0; i < nf; ++i) {
    double c[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t t = 0; t < ns; ++t) c[bin[static_cast<std::size_t>(i)][t]][y[t]] += 1.0;
    q.set_sym(i, i, -table_mi(c, static_cast<double>(ns)));
  }

  for (int i = 0; i < nf; ++i) {
    for (int j = i + 1; j < nf; ++j) {
      double cube[2][2][2] = {{{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}};  // [a][b][y]
      const auto& bi = bin[static_cast<std::size_t>(i)];
      const auto& bj = bin[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < ns; ++t) cube[bi[t]][bj[t]][y[t]] += 1.0;

      // I(f_i; y | f_j): condition on b
      double cmi_i = 0.0, cmi_j = 0.0;
      for (int z = 0; z < 2; ++z) {
        double ca[2][2] = {{cube[0][z][0], cube[0][z][1]}, {cube[1][z][0], cube[1][z][1]}};
        const double nz = ca[0][0] + ca[0][1] + ca[1][0] + ca[1][1];
        cmi_i += (nz / static_cast<double>(ns)) * table_mi(ca, nz);
        double cb[2][2] = {{cube[z][0][0], cube[z][0][1]}, {cube[z][1][0], cube[z][1][1]}};
        const double nz2 = cb[0][0] + cb[0][1] + cb[1][0] + cb[1][1];
        cmi_j += (nz2 / static_cast<double>(ns)) * table_mi(cb, nz2);
      }
      q.set_sym(i, j, -0.5 * (cmi_i + cmi_j));
    }
  }
  return q;
}

SymMatrix build_coqubo(const ItemFeatureMatrix& features, const std::vector<LabeledSample>& labels) {
  if (labels.size() < 2) throw DataError("build_coqubo: need at least 2 samples");
  const int nf = features.num_features();
  const double ns = static_cast<double>(labels.size());

  std::vector<double> sum(static_cast<std::size_t>(nf), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(nf), 0.0);
  std::vector<double> sum_xy(static_cast<std::size_t>(nf), 0.0);
  SymMatrix cross(nf);  // sum over samples of x_i * x_j
  double sum_y = 0.0, sum_y_sq = 0.0;

  for (const LabeledSample& s : labels) {
    const double yv = static_cast<double>(s.label);
    sum_y += yv;
    sum_y_sq += yv * yv;
    const auto& row = features.row(s.item);
    for (const auto& [f, v] : row) {
      sum[static_cast<std::size_t>(f)] += v;
      sum_sq[static_cast<std::size_t>(f)] += v * v;
      sum_xy[static_cast<std::size_t>(f)] += v * yv;
    }
    for (std::size_t a = 0; a < row.size(); ++a)
      for (std::size_t b = a; b < row.size(); ++b)
        cross.add_sym(row[a].first, row[b].first, row[a].second * row[b].second);
  }

  auto variance = [&](double sq, double s) {
    const double var = sq - s * s / ns;
    return var > 1e-12 * std::max(1.0, sq) ? var : 0.0;
  };
  const double var_y = variance(sum_y_sq, sum_y);

  SymMatrix q(nf);
  for (int i = 0; i < nf; ++i) {
    const double var_i = variance(sum_sq[static_cast<std::size_t>(i)], sum[static_cast<std::size_t>(i)]);
    if (var_i == 0.0 || var_y == 0.0) {
      q.set_sym(i, i, 0.0);
      continue;
    }
    const double cov = sum_xy[static_cast<std::size_t>(i)] - sum[static_cast<std::size_t>(i)] * sum_y / ns;
    q.set_sym(i, i, -std::abs(cov / std::sqrt(var_i * var_y)));
  }
  for (int i = 0; i < nf; ++i) {
    const double var_i = variance(sum_sq[static_cast<std::size_t>(i)], sum[static_cast<std::size_t>(i)]);
    for (int j = i + 1; j < nf; ++j) {
      const double var_j = variance(sum_sq[static_cast<std::size_t>(j)], sum[static_cast<std::size_t>(j)]);
      if (var_i == 0.0 || var_j == 0.0) {
        q.set_sym(i, j, 0.0);
        continue;
      }
      const double cov =
          cross.at(i, j) - sum[static_cast<std::size_t>(i)] * sum[static_cast<std::size_t>(j)] / ns;
      double rho = cov / std::sqrt(var_i * var_j);
      rho = std::clamp(rho, -1.0, 1.0);
      q.set_sym(i, j, std::abs(rho));
    }
  }
  return q;
}

SymMatrix build_boosting(const std::vector<std::vector<std::int8_t>>& predictions,
                         const std::vector<LabeledSample>& labels, double regularizer) {
  const int nf = static_cast<int>(predictions.size());
  if (nf == 0) throw DataError("build_boosting: no predictions");
  const std::size_t ns = labels.size();
  if (ns == 0) throw DataError("build_boosting: no labeled samples");
  for (const auto& p : predictions)
    if (p.size() != ns) throw DataError("build_boosting: prediction/label length mismatch");

  std::vector<double> y(ns);
  for (std::size_t t = 0; t < ns; ++t) y[t] = labels[t].label ? 1.0 : -1.0;

  SymMatrix q(nf);
  for (int i = 0; i < nf; ++i) {
    double agree = 0.0;
    for (std::size_t t = 0; t < ns; ++t) agree += predictions[static_cast<std::size_t>(i)][t] * y[t];
    q.set_sym(i, i, regularizer - 2.0 * agree / static_cast<double>(ns));
  }
  for (int i = 0; i < nf; ++i)
    for (int j = i + 1; j < nf; ++j) {
      double agree = 0.0;
      const auto& pi = predictions[static_cast<std::size_t>(i)];
      const auto& pj = predictions[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < ns; ++t) agree += pi[t] * pj[t];
      q.set_sym(i, j, agree / static_cast<double>(ns));
    }
  return q;
}

QuboValidationReport validate_raw(int size, const std::vector<double>& row_major) {
  if (row_major.size() != static_cast<std::size_t>(size) * size)
    throw DataError("validate: values length does not match size " + std::to_string(size));
  auto at = [&](int i, int j) { return row_major[static_cast<std::size_t>(i) * size + j]; };
  QuboValidationReport r;
  r.size = size;
  const int n = size;
  if (n == 0) return r;
  r.min_value = r.max_value = at(0, 0);
  r.diag_min = r.diag_max = at(0, 0);
  double diag_sum = 0.0, offdiag_abs_sum = 0.0;
  int dominant_rows = 0;
  for (int i = 0; i < n; ++i) {
    double row_offdiag_abs = 0.0;
    for (int j = 0; j < n; ++j) {
      const double v = at(i, j);
      if (!std::isfinite(v))
        throw DataError("non-finite coefficient at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
      if (std::abs(v - at(j, i)) > 1e-12)
        throw DataError("asymmetric coefficients at (" + std::to_string(i) + "," +
                        std::to_string(j) + "): " + std::to_string(v) + " vs " +
                        std::to_string(at(j, i)));
      r.min_value = std::min(r.min_value, v);
      r.max_value = std::max(r.max_value, v);
      if (i != j) {
        row_offdiag_abs += std::abs(v);
        offdiag_abs_sum += std::abs(v);
      }
    }
    const double d = at(i, i);
    r.diag_min = std::min(r.diag_min, d);
    r.diag_max = std::max(r.diag_max, d);
    diag_sum += d;
    if (std::abs(d) >= row_offdiag_abs) ++dominant_rows;
  }
  r.diag_mean = diag_sum / n;
  r.offdiag_mean_abs = n > 1 ? offdiag_abs_sum / (static_cast<double>(n) * (n - 1)) : 0.0;
  r.diag_dominance_fraction = static_cast<double>(dominant_rows) / n;
  return r;
}

QuboValidationReport validate(const SymMatrix& q) { return validate_raw(q.size(), q.values()); }

std::string validation_report_json(const QuboValidationReport& r) {
  nlohmann::json j;
  j["size"] = r.size;
  j["min_value"] = r.min_value;
  j["max_value"] = r.max_value;
  j["diag_min"] = r.diag_min;
  j["diag_max"] = r.diag_max;
  j["diag_mean"] = r.diag_mean;
  j["offdiag_mean_abs"] = r.offdiag_mean_abs;
  j["diag_dominance_fraction"] = r.diag_dominance_fraction;
  return j.dump(2);
}

void save_matrix_json(const SymMatrix& q, const std::string& path) {
  nlohmann::json j;
  j["size"] = q.size();
  j["format"] = "dense-sym";
  std::vector<double> lower;
  lower.reserve(static_cast<std::size_t>(q.size()) * (q.size() + 1) / 2);
  for (int i = 0; i < q.size(); ++i)
    for (int jx = 0; jx <= i; ++jx) lower.push_back(q.at(i, jx));
  j["values"] = std::move(lower);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << "\n";
}

SymMatrix load_matrix_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open matrix file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("matrix parse error in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "dense-sym")
    throw DataError("matrix file " + path + ": unknown format \"" + j.value("format", "") + "\"");
  const int n = j.at("size").get<int>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != static_cast<std::size_t>(n) * (n + 1) / 2)
    throw DataError("matrix file " + path + ": values length mismatch");
  SymMatrix q(n);
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int jx = 0; jx <= i; ++jx) q.set_sym(i, jx, values[idx++]);
  return q;
}

void save_matrix_triplets(const SymMatrix& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  for (int i = 0; i < q.size(); ++i)
    for (int j = i; j < q.size(); ++j) {
      const double v = i == j ? q.at(i, i) : 2.0 * q.at(i, j);
      if (v != 0.0) out << i << " " << j << " " << v << "\n";
    }
}

}  // namespace qubofs
