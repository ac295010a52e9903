#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bym2/sparse.hpp"

namespace bym2 {

// Sparse covariance entries of the factored matrix on the factor's fill
// pattern, produced by the Takahashi recursion. Entries are exact there
// because the fill pattern of a Cholesky factor is closed under the
// recursion's access pattern. Queries outside the pattern throw: absence
// means "not computed", not zero.
class SelectedInverse {
 public:
  double operator()(int i, int j) const;
  Eigen::VectorXd diag() const;
  int dim() const { return static_cast<int>(perm_.size()); }

 private:
  friend class Cholesky;
  SpMat z_;                      // lower triangle, permuted ordering
  Eigen::VectorXi perm_;         // original index -> permuted index
};

// Cholesky factorization of a symmetric positive definite sparse matrix
// with a fill-reducing (approximate minimum degree) permutation. The
// symbolic analysis can be reused across matrices with the same pattern.
class Cholesky {
 public:
  // Symbolic analysis only; call factorize afterwards.
  void analyze(const SymSparse& q);

  // Numeric factorization of q + jitter * I. Runs the symbolic analysis
  // first if the pattern has not been analyzed. Throws
  // not_positive_definite when a pivot fails.
  void factorize(const SymSparse& q, double jitter = 0.0);

  bool ready() const { return factorized_; }
  int dim() const { return dim_; }

  // log det of the factored matrix (including any jitter).
  double log_det() const;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

  // Diagonal of the inverse of the factored matrix.
  Eigen::VectorXd inverse_diag() const;

  // Map iid standard normals z to a draw x ~ N(0, M^-1) through the factor.
  Eigen::VectorXd sample_from_factor(const Eigen::VectorXd& z) const;

  // Covariance entries on the factor's fill pattern.
  SelectedInverse selected_inverse() const;

 private:
  using Solver =
      Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;
  Solver llt_;
  int dim_ = 0;
  bool analyzed_ = false;
  bool factorized_ = false;
};

// Dense helpers used for small-n reference computations and for the
// eigenvalue inputs of the mixing prior.

// Eigenvalues of a dense symmetric matrix, ascending.
Eigen::VectorXd eigenvalues_sym(const Eigen::MatrixXd& m);

// Moore-Penrose style inverse dropping the rank_deficiency eigenvalues of
// smallest magnitude.
Eigen::MatrixXd dense_pseudo_inverse(const Eigen::MatrixXd& m,
                                     int rank_deficiency);

}  // namespace bym2
