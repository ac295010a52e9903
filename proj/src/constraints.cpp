#include "bym2/constraints.hpp"

#include <cmath>

#include "bym2/errors.hpp"

namespace bym2 {

void kriging_correct(const Cholesky& factor, const ConstraintSet& c,
                     Eigen::VectorXd& x) {
  if (c.count() == 0) return;
  Eigen::MatrixXd w = factor.solve(Eigen::MatrixXd(c.a.transpose()));
  Eigen::MatrixXd aw = c.a * w;  // k x k, = A Sigma A'
  Eigen::LDLT<Eigen::MatrixXd> ldlt(aw);
  if (ldlt.info() != Eigen::Success)
    throw numeric_error("singular constraint system A Sigma A'");
  Eigen::VectorXd resid = c.a * x - c.e;
  x -= w * ldlt.solve(resid);
}

namespace {

Eigen::VectorXd variances_dense(const SymSparse& q, const ConstraintSet& c,
                                double jitter) {
  Eigen::MatrixXd m = q.dense();
  m.diagonal().array() += jitter;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success)
    throw not_positive_definite("dense factorization failed");
  Eigen::MatrixXd sigma =
      ldlt.solve(Eigen::MatrixXd::Identity(q.n, q.n));
  if (c.count() > 0) {
    Eigen::MatrixXd w = sigma * c.a.transpose();
    Eigen::MatrixXd aw = c.a * w;
    Eigen::LDLT<Eigen::MatrixXd> ildl(aw);
    if (ildl.info() != Eigen::Success)
      throw numeric_error("singular constraint system A Sigma A'");
    sigma -= w * ildl.solve(w.transpose());
  }
  return sigma.diagonal();
}

Eigen::VectorXd variances_selected(const SymSparse& q, const ConstraintSet& c,
                                   double jitter) {
  Cholesky f;
  f.factorize(q, jitter);
  Eigen::VectorXd d = f.inverse_diag();
  if (c.count() > 0) {
    Eigen::MatrixXd w = f.solve(Eigen::MatrixXd(c.a.transpose()));
    Eigen::MatrixXd aw = c.a * w;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(aw);
    if (ldlt.info() != Eigen::Success)
      throw numeric_error("singular constraint system A Sigma A'");
    // diag of W (A Sigma A')^-1 W'
    Eigen::MatrixXd t = ldlt.solve(w.transpose());
    for (int i = 0; i < q.n; ++i) d(i) -= w.row(i).dot(t.col(i));
  }
  return d;
}

}  // namespace

Eigen::VectorXd constrained_marginal_variances(const SymSparse& q,
                                               const ConstraintSet& c,
                                               double jitter,
                                               VarianceMethod method) {
  if (c.count() > 0 && c.dim() != q.n)
    throw numeric_error("constraint dimension mismatch");
  switch (method) {
    case VarianceMethod::dense:
      return variances_dense(q, c, jitter);
    case VarianceMethod::selected:
      return variances_selected(q, c, jitter);
    case VarianceMethod::automatic:
    default:
      return q.n <= 200 ? variances_dense(q, c, jitter)
                        : variances_selected(q, c, jitter);
  }
}

Eigen::VectorXd sample_constrained_gmrf(const SymSparse& q,
                                        const ConstraintSet& c, double jitter,
                                        RngStream& rng) {
  Cholesky f;
  f.factorize(q, jitter);
  Eigen::VectorXd z(q.n);
  for (int i = 0; i < q.n; ++i) z(i) = rng.normal();
  Eigen::VectorXd x = f.sample_from_factor(z);
  if (c.count() > 0) kriging_correct(f, c, x);
  return x;
}

double constrained_log_det(const Cholesky& factor, const ConstraintSet& c) {
  double ld = factor.log_det();
  if (c.count() == 0) return ld;
  Eigen::MatrixXd w = factor.solve(Eigen::MatrixXd(c.a.transpose()));
  Eigen::MatrixXd aw = c.a * w;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_aw(aw);
  Eigen::LDLT<Eigen::MatrixXd> ldlt_aat(Eigen::MatrixXd(c.a * c.a.transpose()));
  if (ldlt_aw.info() != Eigen::Success || ldlt_aat.info() != Eigen::Success)
    throw numeric_error("singular constraint system in log det");
  double ld_aw = 0.0, ld_aat = 0.0;
  for (int i = 0; i < c.count(); ++i) {
    double daw = ldlt_aw.vectorD()(i);
    double daat = ldlt_aat.vectorD()(i);
    if (daw <= 0.0 || daat <= 0.0)
      throw numeric_error("indefinite constraint system in log det");
    ld_aw += std::log(daw);
    ld_aat += std::log(daat);
  }
  return ld + ld_aw - ld_aat;
}

}  // namespace bym2
