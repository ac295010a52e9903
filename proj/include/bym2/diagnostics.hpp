#pragma once

#include <vector>

#include <Eigen/Core>

namespace bym2 {

// Model-choice criteria computed from the grid-mixture marginals of the
// linear predictor. Conventions:
//  - each eta_i marginal is collapsed to a single Gaussian (m_i, s_i)
//    before applying lognormal moment formulas, so reported risk means
//    reproduce exp(m_i + s_i^2/2) exactly;
//  - DIC plugs the posterior mean of eta into the deviance (the focus is
//    recorded so outputs are unambiguous);
//  - CPO uses the harmonic identity per grid point with 61-point
//    Gauss-Hermite quadrature, flagging regions where one quadrature term
//    dominates the sum.
struct Diagnostics {
  double mean_deviance = 0.0;     // E[D(eta)]
  double deviance_at_mean = 0.0;  // D(E[eta])
  double p_d = 0.0;
  double dic = 0.0;
  Eigen::VectorXd cpo;
  std::vector<int> cpo_unstable;  // regions where the top term > 90%
  double log_score = 0.0;
  double rmse = 0.0;
  const char* dic_focus = "posterior mean of the linear predictor";
};

// weights: K grid weights summing to 1; eta_means/eta_sds: K x n per-point
// Gaussian approximation moments of eta.
Diagnostics compute_diagnostics(const Eigen::VectorXd& y,
                                const Eigen::VectorXd& e,
                                const Eigen::VectorXd& weights,
                                const Eigen::MatrixXd& eta_means,
                                const Eigen::MatrixXd& eta_sds);

// -2 sum_i log Poisson(y_i; e_i exp(eta_i))
double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& e,
                        const Eigen::VectorXd& eta);

// -(1/n) sum log cpo_i
double log_score_from_cpo(const Eigen::VectorXd& cpo);

// sqrt((1/n) sum (y_i/e_i - theta_hat_i)^2)
double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& e,
            const Eigen::VectorXd& theta_hat);

}  // namespace bym2
