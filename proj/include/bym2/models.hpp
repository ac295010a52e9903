#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bym2/constraints.hpp"
#include "bym2/graph.hpp"
#include "bym2/priors.hpp"
#include "bym2/scaling.hpp"
#include "bym2/sparse.hpp"

namespace bym2 {

enum class ModelKind { iid, besag, bym, leroux, dean, bym2 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Interior domain for the mixing parameter. The augmented form divides by
// (1 - phi), so inference clamps phi away from both endpoints.
inline constexpr double kPhiMin = 1e-6;
inline constexpr double kPhiMax = 1.0 - 1e-6;

enum class HyperScale {
  precision,  // internal log tau, reported as 1/sqrt(tau)
  mixing,     // internal logit phi, reported as phi
};

struct HyperDef {
  std::string name;  // reporting name, user scale
  HyperScale scale = HyperScale::precision;
};

// Prior selections for one analysis. The mixing-prior default depends on
// the model kind: PC for bym2, uniform for leroux and dean.
struct PriorConfig {
  enum class Phi { by_kind, pc, uniform };

  PrecPrior tau = PrecPrior::pc(0.2 / 0.31, 0.1);
  PrecPrior tau_u = PrecPrior::pc(0.2 / 0.31, 0.1);  // bym structured block
  Phi phi = Phi::by_kind;
  double phi_u = 0.5;
  double phi_alpha = 2.0 / 3.0;
  // Dean's formulation keeps the unscaled structure; this switches it to
  // the scaled one, which makes it coincide with bym2.
  bool scaled_dean = false;
};

// tau((1-phi) I + phi Q), full rank for phi < 1. Accepts the closed
// interval so the stated limits (identity at 0, Q at 1) hold exactly.
SymSparse leroux_precision(double tau, double phi, const SymSparse& q);

// Joint precision of (w1, w2) where w1 is the predictor-block effect and
// w2 the structured component: blocks
//   [ (tau/(1-phi)) I        -(sqrt(phi tau)/(1-phi)) S ]
//   [ symmetric               Q_struct + (phi/(1-phi)) S'S ]
// with S the region -> structured-coordinate selector. Under the
// component sum-to-zero constraints on w2, the marginal covariance of w1
// is (1-phi)/tau I + (phi/tau) Q_struct^-. Singleton regions have a zero
// row in S and keep only the (1-phi)/tau part.
SymSparse joint_mixing_precision(double tau, double phi,
                                 const SymSparse& q_struct,
                                 const std::vector<int>& structured_index);

// The bym2 special case over the scaled structure. Throws for phi outside
// the clamp interval.
SymSparse bym2_joint_precision(double tau, double phi,
                               const ScaledStructure& s);

// A latent Gaussian field plus hyperparameter priors: everything the
// inference machinery needs that depends on the model formulation.
// Immutable after construction; precision() is safe to call concurrently.
class LatentModel {
 public:
  ModelKind kind() const { return kind_; }
  int n_regions() const { return n_; }
  int latent_dim() const { return latent_dim_; }
  const std::vector<HyperDef>& hypers() const { return hypers_; }
  int n_hypers() const { return static_cast<int>(hypers_.size()); }
  const ConstraintSet& constraints() const { return constraints_; }
  // Latent coordinate entering eta_i, or -1 when region i has no latent
  // term (besag singletons).
  const Eigen::VectorXi& pred_index() const { return pred_index_; }
  const ScaledStructure& structure() const { return structure_; }
  const PhiPriorTable& phi_prior() const { return phi_prior_; }
  bool has_mixing() const;

  Eigen::VectorXd initial_theta() const;
  // Internal scales (log tau, logit phi) to reporting scales
  // (1/sqrt(tau), phi).
  Eigen::VectorXd theta_to_user(const Eigen::VectorXd& theta) const;

  SymSparse precision(const Eigen::VectorXd& theta) const;
  // Generalized log determinant of precision(theta) on the constraint
  // surface: log det(V' Q V) for V an orthonormal basis of the constraint
  // null space. Analytic in theta; the structure part is precomputed.
  double log_det_constrained(const Eigen::VectorXd& theta) const;
  // Sum of hyperparameter log prior densities on the internal scales,
  // Jacobians included.
  double log_prior_hyper(const Eigen::VectorXd& theta) const;

 private:
  friend LatentModel build_latent_model(ModelKind, const Graph&,
                                        const PriorConfig&);
  LatentModel() = default;

  void unpack(const Eigen::VectorXd& theta, double* tau, double* tau_u,
              double* phi) const;

  ModelKind kind_ = ModelKind::iid;
  int n_ = 0;
  int latent_dim_ = 0;
  std::vector<HyperDef> hypers_;
  ConstraintSet constraints_ = ConstraintSet::none(0);
  Eigen::VectorXi pred_index_;
  ScaledStructure structure_;

  SymSparse q_struct_;       // structured block (scaled only for bym2)
  SymSparse q_full_;         // leroux: unscaled Besag over all regions
  Eigen::VectorXd gamma_;    // leroux: eigenvalues of q_full_
  double struct_log_det_ = 0.0;  // sum of log nonzero eigenvalues of q_struct_

  PrecPrior tau_prior_ = PrecPrior::pc(1.0, 0.01);
  PrecPrior tau_u_prior_ = PrecPrior::pc(1.0, 0.01);
  PhiPriorTable phi_prior_ = PhiPriorTable::uniform();
};

LatentModel build_latent_model(ModelKind kind, const Graph& g,
                               const PriorConfig& priors = {});

}  // namespace bym2
