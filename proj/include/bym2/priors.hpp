#pragma once

#include <Eigen/Dense>
#include <memory>

#include "bym2/scaling.hpp"

namespace bym2 {

// Type-2 Gumbel density for the precision tau implied by the exponential
// tail bound Prob(1/sqrt(tau) > U) = alpha, theta = -log(alpha)/U.
double pc_prec_log_density(double tau, double theta);

// Prior on a precision parameter.
struct PrecPrior {
  enum class Kind { pc, gamma };
  Kind kind = Kind::pc;
  double u = 1.0, alpha = 0.01, theta = 0.0;  // pc
  double shape = 1.0, rate = 5e-5;            // gamma

  static PrecPrior pc(double u, double alpha);
  static PrecPrior gamma(double shape, double rate);

  double log_density(double tau) const;
  // Density of t = log(tau), Jacobian included.
  double log_density_internal(double t) const;
};

// Kullback-Leibler distance machinery for the mixing parameter. gt holds
// the eigenvalues of the generalized inverse of the scaled structure (zeros
// for null-space directions and singleton regions).
double phi_kld(double phi, const Eigen::VectorXd& gt);
double phi_distance(double phi, const Eigen::VectorXd& gt);
double phi_distance_deriv(double phi, const Eigen::VectorXd& gt);
double calibrate_lambda(const Eigen::VectorXd& gt, double u, double alpha);
double phi_pc_log_density(double phi, double lambda,
                          const Eigen::VectorXd& gt);

// Eigenvalues of q_star^- for a scaled structure: one value per region;
// singletons and per-component null directions contribute zeros.
Eigen::VectorXd gamma_tilde(const ScaledStructure& s);

// Tabulated prior on the mixing parameter phi. The pc kind stores the log
// density on a 1000-point logit(phi) grid over [-10, 10] with monotone
// cubic interpolation; evaluations outside the grid fall back to the direct
// formula. The uniform kind is flat on (0, 1).
class PhiPriorTable {
 public:
  enum class Kind { pc, uniform };

  static PhiPriorTable pc(const ScaledStructure& s, double u, double alpha);
  static PhiPriorTable pc_from_gamma_tilde(const Eigen::VectorXd& gt,
                                           double u, double alpha);
  static PhiPriorTable uniform();

  Kind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  const Eigen::VectorXd& gt() const { return gt_; }
  const Eigen::VectorXd& grid_logit() const { return grid_x_; }
  const Eigen::VectorXd& grid_log_density() const { return grid_y_; }

  // log density of phi on the phi scale.
  double log_density(double phi) const;
  // log density of x = logit(phi), Jacobian included.
  double log_density_internal(double x) const;
  // Direct (untabulated) evaluation; pc kind only.
  double log_density_direct(double phi) const;

  double distance(double phi) const { return phi_distance(phi, gt_); }
  // Exact mass of (phi0, 1): exp(-lambda d(phi0)). The distance scale makes
  // the prior an exponential, so tails and the CDF are closed form.
  double tail_mass(double phi0) const;
  double cdf(double phi) const;

 private:
  Kind kind_ = Kind::uniform;
  Eigen::VectorXd gt_;
  double lambda_ = 0.0, u_ = 0.5, alpha_ = 0.5;
  Eigen::VectorXd grid_x_, grid_y_, grid_m_;  // knots, values, slopes
};

double uniform_phi_log_density(double phi);

}  // namespace bym2
