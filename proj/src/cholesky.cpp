#include "bym2/cholesky.hpp"

#include <algorithm>
#include <cmath>

#include "bym2/errors.hpp"

namespace bym2 {

namespace {

SpMat with_jitter(const SymSparse& q, double jitter) {
  if (jitter == 0.0) return q.lower;
  SpMat eye(q.n, q.n);
  eye.setIdentity();
  SpMat out = q.lower + jitter * eye;
  out.makeCompressed();
  return out;
}

}  // namespace

void Cholesky::analyze(const SymSparse& q) {
  llt_.analyzePattern(q.lower);
  dim_ = q.n;
  analyzed_ = true;
  factorized_ = false;
}

void Cholesky::factorize(const SymSparse& q, double jitter) {
  SpMat m = with_jitter(q, jitter);
  if (!analyzed_ || dim_ != q.n) {
    llt_.analyzePattern(m);
    dim_ = q.n;
    analyzed_ = true;
  }
  llt_.factorize(m);
  if (llt_.info() != Eigen::Success)
    throw not_positive_definite("Cholesky factorization failed: pivot <= 0");
  factorized_ = true;
}

double Cholesky::log_det() const {
  if (!factorized_) throw numeric_error("factorize before log_det");
  SpMat l = llt_.matrixL();
  l.makeCompressed();
  // Columns are sorted, so each column's first stored entry is the diagonal.
  const int* outer = l.outerIndexPtr();
  const double* lv = l.valuePtr();
  double s = 0.0;
  for (int j = 0; j < dim_; ++j) s += std::log(lv[outer[j]]);
  return 2.0 * s;
}

Eigen::VectorXd Cholesky::solve(const Eigen::VectorXd& b) const {
  if (!factorized_) throw numeric_error("factorize before solve");
  if (b.size() != dim_) throw numeric_error("solve: dimension mismatch");
  return llt_.solve(b);
}

Eigen::MatrixXd Cholesky::solve(const Eigen::MatrixXd& b) const {
  if (!factorized_) throw numeric_error("factorize before solve");
  if (b.rows() != dim_) throw numeric_error("solve: dimension mismatch");
  return llt_.solve(b);
}

Eigen::VectorXd Cholesky::sample_from_factor(const Eigen::VectorXd& z) const {
  if (!factorized_) throw numeric_error("factorize before sampling");
  if (z.size() != dim_) throw numeric_error("sample: dimension mismatch");
  // With P M P' = L L', a draw is x = P^-1 L^-T z:
  //   Cov(x) = P^-1 L^-T L^-1 P = M^-1.
  Eigen::VectorXd y = llt_.matrixU().solve(z);
  return llt_.permutationPinv() * y;
}

SelectedInverse Cholesky::selected_inverse() const {
  if (!factorized_) throw numeric_error("factorize before selected_inverse");
  SpMat l = llt_.matrixL();
  l.makeCompressed();
  const int n = dim_;
  const int* outer = l.outerIndexPtr();
  const int* inner = l.innerIndexPtr();
  const double* lv = l.valuePtr();

  SelectedInverse out;
  out.z_ = l;  // copy the pattern; values are overwritten below
  double* zv = out.z_.valuePtr();

  // z(a, b) for a >= b, stored on the factor pattern.
  auto zget = [&](int b, int a) -> double {
    int lo = outer[b], hi = outer[b + 1];
    const int* it = std::lower_bound(inner + lo, inner + hi, a);
    if (it != inner + hi && *it == a) return zv[it - inner];
    return 0.0;
  };

  // Takahashi recursion, columns right to left; within a column the rows
  // are processed bottom up so that required entries are already final.
  for (int j = n - 1; j >= 0; --j) {
    const double ljj = lv[outer[j]];  // sorted: first entry is the diagonal
    for (int idx = outer[j + 1] - 1; idx >= outer[j]; --idx) {
      const int i = inner[idx];
      double s = 0.0;
      for (int k = outer[j] + 1; k < outer[j + 1]; ++k) {
        const int row = inner[k];
        const double zval = row >= i ? zget(i, row) : zget(row, i);
        s += lv[k] * zval;
      }
      if (i == j)
        zv[idx] = 1.0 / (ljj * ljj) - s / ljj;
      else
        zv[idx] = -s / ljj;
    }
  }

  out.perm_ = llt_.permutationP().indices();
  return out;
}

Eigen::VectorXd Cholesky::inverse_diag() const {
  return selected_inverse().diag();
}

double SelectedInverse::operator()(int i, int j) const {
  int a = perm_(i), b = perm_(j);
  if (a < b) std::swap(a, b);
  const int* outer = z_.outerIndexPtr();
  const int* inner = z_.innerIndexPtr();
  int lo = outer[b], hi = outer[b + 1];
  const int* it = std::lower_bound(inner + lo, inner + hi, a);
  if (it == inner + hi || *it != a)
    throw numeric_error("selected inverse: entry outside factor pattern");
  return z_.valuePtr()[it - inner];
}

Eigen::VectorXd SelectedInverse::diag() const {
  const int n = dim();
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = (*this)(i, i);
  return d;
}

Eigen::VectorXd eigenvalues_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw numeric_error("symmetric eigendecomposition failed");
  return es.eigenvalues();
}

Eigen::MatrixXd dense_pseudo_inverse(const Eigen::MatrixXd& m,
                                     int rank_deficiency) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw numeric_error("symmetric eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const Eigen::MatrixXd& v = es.eigenvectors();
  const int n = static_cast<int>(ev.size());

  // Drop the rank_deficiency eigenvalues of smallest magnitude.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(ev(a)) < std::abs(ev(b));
  });
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
  for (int k = rank_deficiency; k < n; ++k) {
    int i = order[k];
    inv(i) = 1.0 / ev(i);
  }
  return v * inv.asDiagonal() * v.transpose();
}

}  // namespace bym2
