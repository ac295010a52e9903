#pragma once

#include <Eigen/Dense>

namespace bym2 {

// Gauss-Hermite rule for the weight exp(-x^2): sum w_i f(x_i) approximates
// the integral of exp(-x^2) f(x). Nodes ascending; weights sum to sqrt(pi).
struct GaussHermite {
  Eigen::VectorXd x;
  Eigen::VectorXd w;
};

GaussHermite gauss_hermite(int n);

// The 61-point rule used by the predictive-density integrals, cached.
const GaussHermite& gauss_hermite_61();

}  // namespace bym2
