#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "bym2/errors.hpp"

namespace bym2 {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Triplets = std::vector<Triplet>;

// Symmetric sparse matrix. Only the lower triangle (row >= col) is stored,
// in compressed column form with sorted inner indices.
struct SymSparse {
  int n = 0;
  SpMat lower;

  SymSparse() = default;
  SymSparse(int dim, const SpMat& lower_part) : n(dim), lower(lower_part) {}

  // Build from triplets given in either triangle; entries are folded into
  // the lower triangle. Duplicate coordinates are summed, so each logical
  // entry must be passed in one orientation only.
  static SymSparse from_triplets(int dim, const Triplets& entries) {
    if (dim <= 0) throw numeric_error("matrix dimension must be positive");
    Triplets folded;
    folded.reserve(entries.size());
    for (const auto& t : entries) {
      int r = t.row() >= t.col() ? t.row() : t.col();
      int c = t.row() >= t.col() ? t.col() : t.row();
      folded.emplace_back(r, c, t.value());
    }
    SpMat m(dim, dim);
    m.setFromTriplets(folded.begin(), folded.end());
    m.makeCompressed();
    return SymSparse(dim, m);
  }

  static SymSparse from_dense(const Eigen::MatrixXd& m) {
    Triplets t;
    for (int j = 0; j < m.cols(); ++j)
      for (int i = j; i < m.rows(); ++i)
        if (m(i, j) != 0.0) t.emplace_back(i, j, m(i, j));
    return from_triplets(static_cast<int>(m.rows()), t);
  }

  // Full symmetric matrix (both triangles populated).
  SpMat full() const {
    SpMat up = lower.transpose();
    SpMat strict_up = up.triangularView<Eigen::StrictlyUpper>();
    SpMat out = lower + strict_up;
    out.makeCompressed();
    return out;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(full()); }

  double mean_diagonal() const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += lower.coeff(i, i);
    return n > 0 ? s / n : 0.0;
  }

  // Stored entries in the compressed lower triangle.
  int nnz_lower() const { return static_cast<int>(lower.nonZeros()); }

  SymSparse scaled(double a) const { return SymSparse(n, SpMat(a * lower)); }
};

}  // namespace bym2
