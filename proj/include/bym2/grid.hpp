#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bym2/dataset.hpp"
#include "bym2/diagnostics.hpp"
#include "bym2/gaussian_approx.hpp"
#include "bym2/models.hpp"

namespace bym2 {

// Controls for the hyperparameter exploration. The defaults favour accuracy;
// simulation studies use a coarser dz and a smaller diff_logdens.
struct GridConfig {
  double dz = 0.2;            // grid step in standardized z units
  double diff_logdens = 20.0; // keep points within this of the mode
  int max_points = 4000;      // expansion cap; sets `truncated` when hit
  int threads = 0;            // 0 picks hardware concurrency
  double fe_prior_variance = 100.0;
  double mu_prior_mean = 0.0;
  ApproxOptions approx;
  int nm_max_iterations = 300;
  double nm_tolerance = 1e-4; // simplex diameter on the internal scale
  double hessian_step = 0.05; // central-difference step at the mode
  // Directions with (numerically) zero curvature get this step scale so a
  // flat hyperposterior still yields a finite grid.
  double scale_cap = 5.0;
};

struct GridPoint {
  Eigen::VectorXd theta;       // internal scale
  Eigen::VectorXd theta_user;  // user scale (1/sqrt(tau), phi)
  Eigen::VectorXd z;           // standardized offset from the mode
  double log_post = 0.0;       // unnormalized
  double weight = 0.0;
};

// Posterior summary row. For hyperparameters the mode is taken at the grid
// maximizer; for Gaussian-mixture quantities it maximizes the mixture
// density.
struct SummaryStats {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  double mode = 0.0;
};

struct FitResult {
  ModelKind kind = ModelKind::iid;

  std::vector<GridPoint> grid;
  std::vector<SummaryStats> hyper;  // user scale, one row per hyperparameter
  SummaryStats intercept;
  std::vector<SummaryStats> beta;   // one row per covariate column

  // Latent marginals: each eta_i mixture collapsed to (mean, sd); risks are
  // lognormal transforms of exactly these pairs.
  Eigen::VectorXd eta_mean, eta_sd;
  Eigen::VectorXd risk_mean, risk_sd;

  Diagnostics diagnostics;

  // Convergence and reproducibility metadata.
  Eigen::VectorXd theta_mode;  // internal scale, hyper mode search result
  double log_post_mode = 0.0;
  int nm_evaluations = 0;
  int newton_iterations_total = 0;
  int grid_size = 0;
  int evaluated_points = 0;
  int failed_points = 0;
  bool truncated = false;       // max_points reached before pruning closed
  double max_grad_norm = 0.0;   // largest constrained gradient over the grid
  std::string hyper_mode_note = "hyper mode column reports the grid maximizer";
};

// Full approximate-inference pass: hyper mode search, standardized grid with
// pruning, per-point Gaussian approximations, mixture summaries, model
// criteria. Deterministic for fixed inputs regardless of thread count.
FitResult fit(const LatentModel& model, const Dataset& data,
              const GridConfig& cfg = {});

// Weighted-atom quantile with midpoint interpolation; atoms need not be
// sorted. weights must sum to 1.
double weighted_quantile(const Eigen::VectorXd& values,
                         const Eigen::VectorXd& weights, double q);

}  // namespace bym2
