#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qubofs/common.hpp"

namespace qubofs {

// Dense symmetric real matrix. Writes go through set_sym so the symmetry
// invariant cannot drift; readers may index either triangle.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int size) : size_(size), values_(static_cast<std::size_t>(size) * size, 0.0) {
    if (size < 0) throw DataError("SymMatrix: negative size");
  }

  int size() const { return size_; }

  double at(int i, int j) const { return values_[idx(i, j)]; }

  void set_sym(int i, int j, double v) {
    values_[idx(i, j)] = v;
    values_[idx(j, i)] = v;
  }

  void add_sym(int i, int j, double v) {
    values_[idx(i, j)] += v;
    if (i != j) values_[idx(j, i)] += v;
  }

  const std::vector<double>& values() const { return values_; }

  bool operator==(const SymMatrix& other) const = default;

  void fingerprint(Fingerprint& fp) const {
    fp.add(size_);
    for (double v : values_) fp.add(v);
  }

 private:
  std::size_t idx(int i, int j) const {
    if (i < 0 || j < 0 || i >= size_ || j >= size_)
      throw DataError("SymMatrix: index (" + std::to_string(i) + "," + std::to_string(j) +
                      ") out of range for size " + std::to_string(size_));
    return static_cast<std::size_t>(i) * size_ + j;
  }

  int size_ = 0;
  std::vector<double> values_;
};

// Binary solution vector; bit i selects feature i.
using BitVector = std::vector<std::uint8_t>;

inline int popcount(const BitVector& bits) {
  int n = 0;
  for (auto b : bits) n += b ? 1 : 0;
  return n;
}

inline std::vector<int> ones_of(const BitVector& bits) {
  std::vector<int> out;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out.push_back(static_cast<int>(i));
  return out;
}

inline std::vector<int> zeros_of(const BitVector& bits) {
  std::vector<int> out;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (!bits[i]) out.push_back(static_cast<int>(i));
  return out;
}

// Lexicographic order reading index-ascending, i.e. (0,1,1) < (1,0,1).
// Used as the global tie-break rule for equal-energy solutions.
inline bool lex_less(const BitVector& a, const BitVector& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return a.size() < b.size();
}

}  // namespace qubofs
