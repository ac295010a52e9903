#pragma once

#include <Eigen/Core>

#include "bym2/cholesky.hpp"
#include "bym2/constraints.hpp"
#include "bym2/models.hpp"

namespace bym2 {

// Per-observation likelihood in the predictor eta_i. The Newton machinery
// only needs the value and two derivatives, so tests can swap in a
// Gaussian likelihood where a single step is exact.
class Likelihood {
 public:
  virtual ~Likelihood() = default;
  virtual int n() const = 0;
  virtual double log_density(int i, double eta) const = 0;
  virtual double d1(int i, double eta) const = 0;
  virtual double d2(int i, double eta) const = 0;
};

// y_i ~ Poisson(E_i exp(eta_i)), densities kept exact including the
// lgamma(y+1) terms so Laplace values can be compared against quadrature.
class PoissonLikelihood final : public Likelihood {
 public:
  PoissonLikelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& e);
  int n() const override { return static_cast<int>(y_.size()); }
  double log_density(int i, double eta) const override;
  double d1(int i, double eta) const override;
  double d2(int i, double eta) const override;
  const Eigen::VectorXd& counts() const { return y_; }
  const Eigen::VectorXd& log_expected() const { return log_e_; }

 private:
  Eigen::VectorXd y_, log_e_, lgamma_y1_;
};

// y_i ~ N(eta_i, sd^2) with known sd; quadratic log density.
class GaussianLikelihood final : public Likelihood {
 public:
  GaussianLikelihood(const Eigen::VectorXd& y, double sd);
  int n() const override { return static_cast<int>(y_.size()); }
  double log_density(int i, double eta) const override;
  double d1(int i, double eta) const override;
  double d2(int i, double eta) const override;

 private:
  Eigen::VectorXd y_;
  double inv_var_;
};

struct FixedEffectsConfig {
  Eigen::MatrixXd z;  // n x p covariate columns; empty for intercept-only
  double prior_variance = 100.0;
  // Prior mean of the intercept. Nonzero values let offset shifts be
  // compensated exactly, which the shift-invariance checks rely on.
  double mu_prior_mean = 0.0;
};

struct ApproxOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;  // on max |delta eta|
  int max_step_halvings = 30;
};

struct ApproxResult {
  Eigen::VectorXd mode;  // latent block, then mu, then beta
  Eigen::VectorXd eta;   // predictor at the mode
  double log_post = 0.0;  // Laplace log posterior of theta, unnormalized
  double log_lik = 0.0;
  double log_det_h = 0.0;  // constrained logdet of the approx precision
  int iterations = 0;
  double grad_norm = 0.0;  // constrained gradient norm at the mode
};

// Predictor map: eta = latent[pred] + mu + z beta. The fixed effects are
// appended to the latent vector with independent N(mean, prior_variance)
// priors; constraints gain zero columns for them.
int approx_dim(const LatentModel& model, const FixedEffectsConfig& fe);
ConstraintSet extended_constraints(const LatentModel& model,
                                   const FixedEffectsConfig& fe);

// Damped constrained Newton on the joint log posterior at fixed theta.
// The factor is caller-owned so its symbolic analysis is reused across
// evaluations; on return it holds the approximation precision at the mode.
// warm_start, when given, must satisfy the constraints.
ApproxResult gaussian_approx(const LatentModel& model, const Likelihood& lik,
                             const FixedEffectsConfig& fe,
                             const Eigen::VectorXd& theta, Cholesky& factor,
                             const ApproxOptions& opts = {},
                             const Eigen::VectorXd* warm_start = nullptr);

struct PredictorMoments {
  Eigen::VectorXd mean;  // eta_i
  Eigen::VectorXd sd;
  double mu_mean = 0.0, mu_sd = 0.0;
  Eigen::VectorXd beta_mean, beta_sd;
};

// Constraint-corrected marginal moments of the predictor and the fixed
// effects under the approximation held in factor (selected inverse plus
// one solve per constraint row).
PredictorMoments predictor_moments(const LatentModel& model,
                                   const FixedEffectsConfig& fe,
                                   const ApproxResult& res,
                                   const Cholesky& factor);

}  // namespace bym2
