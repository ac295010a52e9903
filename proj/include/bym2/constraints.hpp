#pragma once

#include <Eigen/Dense>

#include "bym2/cholesky.hpp"
#include "bym2/rng.hpp"
#include "bym2/sparse.hpp"

namespace bym2 {

// Linear constraints A x = e. Rows must be linearly independent. The empty
// set (zero rows) is valid and makes every constrained operation collapse
// to its unconstrained counterpart.
struct ConstraintSet {
  Eigen::MatrixXd a;  // k x n
  Eigen::VectorXd e;  // k

  int count() const { return static_cast<int>(a.rows()); }
  int dim() const { return static_cast<int>(a.cols()); }

  static ConstraintSet none(int n) {
    ConstraintSet c;
    c.a.resize(0, n);
    c.e.resize(0);
    return c;
  }

  static ConstraintSet sum_to_zero(int n) {
    ConstraintSet c;
    c.a = Eigen::MatrixXd::Ones(1, n);
    c.e = Eigen::VectorXd::Zero(1);
    return c;
  }
};

enum class VarianceMethod { automatic, selected, dense };

// Conditioning by kriging: x <- x - Sigma A' (A Sigma A')^-1 (A x - e),
// with Sigma the inverse of the factored matrix. Afterwards A x = e.
void kriging_correct(const Cholesky& factor, const ConstraintSet& c,
                     Eigen::VectorXd& x);

// Diagonal of Var(b | A b = e) for b ~ N(0, (q + jitter I)^-1). The
// production path combines the Takahashi diagonal with one solve per
// constraint row; the dense path (n <= 2000) inverts explicitly and is the
// reference the sparse path is tested against.
Eigen::VectorXd constrained_marginal_variances(
    const SymSparse& q, const ConstraintSet& c, double jitter,
    VarianceMethod method = VarianceMethod::automatic);

// Draw from N(0, (q + jitter I)^-1) conditioned on A x = e.
Eigen::VectorXd sample_constrained_gmrf(const SymSparse& q,
                                        const ConstraintSet& c, double jitter,
                                        RngStream& rng);

// log det(V' M V) where V is an orthonormal basis of the null space of A
// and M is the factored matrix:
//   log det M + log det(A M^-1 A') - log det(A A').
// This is the normalization constant of a Gaussian with precision M
// restricted to the constraint manifold. With no constraints it reduces to
// log det M.
double constrained_log_det(const Cholesky& factor, const ConstraintSet& c);

}  // namespace bym2
