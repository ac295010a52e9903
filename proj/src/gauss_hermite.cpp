#include "bym2/gauss_hermite.hpp"

#include <cmath>

#include "bym2/errors.hpp"

namespace bym2 {

namespace {

// Orthonormal Hermite polynomials wrt exp(-x^2):
//   p0 = pi^-1/4,  p_{k+1} = x sqrt(2/(k+1)) p_k - sqrt(k/(k+1)) p_{k-1}.
// Returns p_n(x); *prev gets p_{n-1}(x).
double orthonormal_hermite(int n, double x, double* prev) {
  double pm1 = 0.0;
  double p = std::pow(M_PI, -0.25);
  for (int k = 0; k < n; ++k) {
    double next = x * std::sqrt(2.0 / (k + 1)) * p -
                  std::sqrt(static_cast<double>(k) / (k + 1)) * pm1;
    pm1 = p;
    p = next;
  }
  if (prev) *prev = pm1;
  return p;
}

}  // namespace

// Nodes from the symmetric Jacobi matrix of the Hermite recurrence
// (Golub-Welsch), polished by Newton on the orthonormal recurrence. Weights
// come from the Christoffel identity w = 1/sum_{k<n} p_k(x)^2, which keeps
// full relative accuracy in the far tail; the eigenvector-squared weights
// lose all relative precision once they fall below the eigensolver's
// absolute tolerance, and downstream quadratures that multiply by exp(x^2)
// depend on tail weights near 1e-46.
GaussHermite gauss_hermite(int n) {
  if (n < 1) throw numeric_error("gauss_hermite: n must be positive");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = std::sqrt(k / 2.0);
    j(k, k - 1) = b;
    j(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  if (es.info() != Eigen::Success)
    throw numeric_error("gauss_hermite: eigendecomposition failed");
  GaussHermite gh;
  gh.x = es.eigenvalues();
  gh.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = gh.x(i);
    for (int it = 0; it < 3; ++it) {
      double pm1;
      double p = orthonormal_hermite(n, x, &pm1);
      // p_n'(x) = sqrt(2n) p_{n-1}(x)
      x -= p / (std::sqrt(2.0 * n) * pm1);
    }
    if (2 * i == n - 1) x = 0.0;  // central node of an odd rule
    double acc = 0.0;
    double pm1 = 0.0;
    double p = std::pow(M_PI, -0.25);
    for (int k = 0; k < n; ++k) {
      acc += p * p;
      double next = x * std::sqrt(2.0 / (k + 1)) * p -
                    std::sqrt(static_cast<double>(k) / (k + 1)) * pm1;
      pm1 = p;
      p = next;
    }
    double w = 1.0 / acc;
    gh.x(n - 1 - i) = -x;
    gh.w(n - 1 - i) = w;
    gh.x(i) = x;
    gh.w(i) = w;
  }
  return gh;
}

const GaussHermite& gauss_hermite_61() {
  static const GaussHermite gh = gauss_hermite(61);
  return gh;
}

}  // namespace bym2
