#include "bym2/models.hpp"

#include <algorithm>
#include <cmath>

#include "bym2/cholesky.hpp"
#include "bym2/errors.hpp"

namespace bym2 {

namespace {

double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Unscaled Besag block restricted to the structured coordinates. Every
// neighbour of a structured region is structured (components are maximal),
// so the restriction drops only zero rows.
SymSparse structured_besag(const Graph& g,
                           const std::vector<int>& structured_index,
                           int ns) {
  Triplets ts;
  for (int i = 0; i < g.n; ++i) {
    int si = structured_index[i];
    if (si < 0) continue;
    ts.emplace_back(si, si, static_cast<double>(g.degree(i)));
    for (int j : g.neighbours[i]) {
      if (j <= i) continue;
      int sj = structured_index[j];
      if (sj < 0) throw numeric_error("neighbour of a structured region lacks a structured index");
      ts.emplace_back(std::max(si, sj), std::min(si, sj), -1.0);
    }
  }
  return SymSparse::from_triplets(ns, ts);
}

// Sum of log nonzero eigenvalues; the smallest rank_def eigenvalues must
// be numerically zero or the declared rank deficiency is wrong.
double positive_log_det(const SymSparse& q, int rank_def) {
  Eigen::VectorXd eigs = eigenvalues_sym(q.dense());
  int m = static_cast<int>(eigs.size());
  double top = std::abs(eigs(m - 1));
  if (rank_def > 0 && std::abs(eigs(rank_def - 1)) > 1e-8 * top)
    throw numeric_error("structure rank deficiency does not match its null space");
  double s = 0.0;
  for (int i = rank_def; i < m; ++i) {
    if (eigs(i) <= 0.0) throw numeric_error("structure block is not positive semidefinite");
    s += std::log(eigs(i));
  }
  return s;
}

ConstraintSet shift_constraints(const ConstraintSet& c, int offset,
                                int total) {
  if (c.count() == 0) return ConstraintSet::none(total);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(c.count(), total);
  a.block(0, offset, c.count(), c.dim()) = c.a;
  return ConstraintSet{a, c.e};
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::iid: return "iid";
    case ModelKind::besag: return "besag";
    case ModelKind::bym: return "bym";
    case ModelKind::leroux: return "leroux";
    case ModelKind::dean: return "dean";
    case ModelKind::bym2: return "bym2";
  }
  throw error("unhandled model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "iid") return ModelKind::iid;
  if (name == "besag") return ModelKind::besag;
  if (name == "bym") return ModelKind::bym;
  if (name == "leroux") return ModelKind::leroux;
  if (name == "dean") return ModelKind::dean;
  if (name == "bym2") return ModelKind::bym2;
  throw error("unknown model kind: " + name);
}

SymSparse leroux_precision(double tau, double phi, const SymSparse& q) {
  if (tau <= 0.0) throw error("precision must be positive");
  if (phi < 0.0 || phi > 1.0) throw error("mixing parameter must lie in [0,1]");
  Triplets ts;
  ts.reserve(q.lower.nonZeros() + q.n);
  for (int j = 0; j < q.lower.outerSize(); ++j)
    for (SpMat::InnerIterator it(q.lower, j); it; ++it) {
      double v = tau * phi * it.value();
      if (it.row() == it.col()) v += tau * (1.0 - phi);
      ts.emplace_back(it.row(), it.col(), v);
    }
  return SymSparse::from_triplets(q.n, ts);
}

SymSparse joint_mixing_precision(double tau, double phi,
                                 const SymSparse& q_struct,
                                 const std::vector<int>& structured_index) {
  if (tau <= 0.0) throw error("precision must be positive");
  if (phi < kPhiMin || phi > kPhiMax)
    throw error("mixing parameter outside the interior domain");
  int n = static_cast<int>(structured_index.size());
  int ns = q_struct.n;
  double c1 = tau / (1.0 - phi);
  double c2 = std::sqrt(phi * tau) / (1.0 - phi);
  double c3 = phi / (1.0 - phi);
  Triplets ts;
  ts.reserve(n + 2 * ns + q_struct.lower.nonZeros());
  for (int i = 0; i < n; ++i) ts.emplace_back(i, i, c1);
  for (int i = 0; i < n; ++i) {
    int si = structured_index[i];
    if (si >= 0) ts.emplace_back(n + si, i, -c2);
  }
  for (int j = 0; j < q_struct.lower.outerSize(); ++j)
    for (SpMat::InnerIterator it(q_struct.lower, j); it; ++it)
      ts.emplace_back(n + it.row(), n + it.col(), it.value());
  for (int j = 0; j < ns; ++j) ts.emplace_back(n + j, n + j, c3);
  return SymSparse::from_triplets(n + ns, ts);
}

SymSparse bym2_joint_precision(double tau, double phi,
                               const ScaledStructure& s) {
  return joint_mixing_precision(tau, phi, s.q_star, s.structured_index);
}

bool LatentModel::has_mixing() const {
  return kind_ == ModelKind::leroux || kind_ == ModelKind::dean ||
         kind_ == ModelKind::bym2;
}

Eigen::VectorXd LatentModel::initial_theta() const {
  Eigen::VectorXd t(n_hypers());
  for (int i = 0; i < n_hypers(); ++i)
    t(i) = hypers_[i].scale == HyperScale::precision ? 4.0 : 0.0;
  return t;
}

Eigen::VectorXd LatentModel::theta_to_user(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd u(theta.size());
  for (int i = 0; i < theta.size(); ++i)
    u(i) = hypers_[i].scale == HyperScale::precision
               ? std::exp(-0.5 * theta(i))
               : inv_logit(theta(i));
  return u;
}

void LatentModel::unpack(const Eigen::VectorXd& theta, double* tau,
                         double* tau_u, double* phi) const {
  if (theta.size() != n_hypers())
    throw error("hyperparameter vector has the wrong length");
  *tau = std::exp(theta(0));
  *tau_u = kind_ == ModelKind::bym ? std::exp(theta(1)) : 0.0;
  *phi = has_mixing()
             ? std::clamp(inv_logit(theta(1)), kPhiMin, kPhiMax)
             : 0.0;
}

SymSparse LatentModel::precision(const Eigen::VectorXd& theta) const {
  double tau, tau_u, phi;
  unpack(theta, &tau, &tau_u, &phi);
  switch (kind_) {
    case ModelKind::iid: {
      Triplets ts;
      for (int i = 0; i < n_; ++i) ts.emplace_back(i, i, tau);
      return SymSparse::from_triplets(n_, ts);
    }
    case ModelKind::besag:
      return q_struct_.scaled(tau);
    case ModelKind::bym: {
      // stack (v + u selector form): w1 = total effect, w2 = u
      int ns = q_struct_.n;
      Triplets ts;
      for (int i = 0; i < n_; ++i) ts.emplace_back(i, i, tau);
      for (int i = 0; i < n_; ++i) {
        int si = structure_.structured_index[i];
        if (si >= 0) ts.emplace_back(n_ + si, i, -tau);
      }
      for (int j = 0; j < q_struct_.lower.outerSize(); ++j)
        for (SpMat::InnerIterator it(q_struct_.lower, j); it; ++it)
          ts.emplace_back(n_ + it.row(), n_ + it.col(), tau_u * it.value());
      for (int j = 0; j < ns; ++j) ts.emplace_back(n_ + j, n_ + j, tau);
      return SymSparse::from_triplets(n_ + ns, ts);
    }
    case ModelKind::leroux:
      return leroux_precision(tau, phi, q_full_);
    case ModelKind::dean:
    case ModelKind::bym2:
      return joint_mixing_precision(tau, phi, q_struct_,
                                    structure_.structured_index);
  }
  throw error("unhandled model kind");
}

double LatentModel::log_det_constrained(const Eigen::VectorXd& theta) const {
  if (theta.size() != n_hypers())
    throw error("hyperparameter vector has the wrong length");
  double t = theta(0);
  int ns = structure_.n_structured();
  int k = structure_.rank_deficiency;
  switch (kind_) {
    case ModelKind::iid:
      return n_ * t;
    case ModelKind::besag:
      return (ns - k) * t + struct_log_det_;
    case ModelKind::bym:
      return n_ * t + (ns - k) * theta(1) + struct_log_det_;
    case ModelKind::leroux: {
      double phi = std::clamp(inv_logit(theta(1)), kPhiMin, kPhiMax);
      double s = 0.0;
      for (int i = 0; i < gamma_.size(); ++i)
        s += std::log1p(phi * (gamma_(i) - 1.0));
      return n_ * t + s;
    }
    case ModelKind::dean:
    case ModelKind::bym2: {
      double phi = std::clamp(inv_logit(theta(1)), kPhiMin, kPhiMax);
      return n_ * (t - std::log1p(-phi)) + struct_log_det_;
    }
  }
  throw error("unhandled model kind");
}

double LatentModel::log_prior_hyper(const Eigen::VectorXd& theta) const {
  if (theta.size() != n_hypers())
    throw error("hyperparameter vector has the wrong length");
  double lp = tau_prior_.log_density_internal(theta(0));
  if (kind_ == ModelKind::bym)
    lp += tau_u_prior_.log_density_internal(theta(1));
  else if (has_mixing())
    lp += phi_prior_.log_density_internal(theta(1));
  return lp;
}

LatentModel build_latent_model(ModelKind kind, const Graph& g,
                               const PriorConfig& priors) {
  LatentModel m;
  m.kind_ = kind;
  m.n_ = g.n;
  m.structure_ = scale_structured(g);
  m.tau_prior_ = priors.tau;
  m.tau_u_prior_ = priors.tau_u;
  int ns = m.structure_.n_structured();
  int k = m.structure_.rank_deficiency;

  bool needs_structure = kind != ModelKind::iid;
  if (needs_structure && ns == 0)
    throw error("model '" + to_string(kind) +
                "' needs at least one adjacency; all regions are singletons");

  auto identity_pred = [&] {
    m.pred_index_.resize(g.n);
    for (int i = 0; i < g.n; ++i) m.pred_index_(i) = i;
  };
  auto mixing_hypers = [&] {
    m.hypers_ = {{"1/sqrt(tau)", HyperScale::precision},
                 {"phi", HyperScale::mixing}};
  };
  auto resolve_phi_prior = [&](bool scaled) {
    PriorConfig::Phi choice = priors.phi;
    if (choice == PriorConfig::Phi::by_kind)
      choice = scaled ? PriorConfig::Phi::pc : PriorConfig::Phi::uniform;
    if (choice == PriorConfig::Phi::pc) {
      if (!scaled)
        throw error("the pc mixing prior is defined against the scaled structure; use bym2 or the scaled dean variant");
      m.phi_prior_ = PhiPriorTable::pc(m.structure_, priors.phi_u, priors.phi_alpha);
    } else {
      m.phi_prior_ = PhiPriorTable::uniform();
    }
  };

  switch (kind) {
    case ModelKind::iid:
      m.latent_dim_ = g.n;
      identity_pred();
      m.constraints_ = ConstraintSet::none(g.n);
      m.hypers_ = {{"1/sqrt(tau)", HyperScale::precision}};
      break;
    case ModelKind::besag:
      m.q_struct_ = structured_besag(g, m.structure_.structured_index, ns);
      m.latent_dim_ = ns;
      m.pred_index_.resize(g.n);
      for (int i = 0; i < g.n; ++i)
        m.pred_index_(i) = m.structure_.structured_index[i];
      m.constraints_ = m.structure_.constraints;
      m.struct_log_det_ = positive_log_det(m.q_struct_, k);
      m.hypers_ = {{"1/sqrt(tau)", HyperScale::precision}};
      break;
    case ModelKind::bym:
      m.q_struct_ = structured_besag(g, m.structure_.structured_index, ns);
      m.latent_dim_ = g.n + ns;
      identity_pred();
      m.constraints_ = shift_constraints(m.structure_.constraints, g.n, g.n + ns);
      m.struct_log_det_ = positive_log_det(m.q_struct_, k);
      m.hypers_ = {{"1/sqrt(tau_v)", HyperScale::precision},
                   {"1/sqrt(tau_u)", HyperScale::precision}};
      break;
    case ModelKind::leroux:
      m.q_full_ = besag_precision(g);
      m.gamma_ = eigenvalues_sym(m.q_full_.dense()).cwiseMax(0.0);
      m.latent_dim_ = g.n;
      identity_pred();
      m.constraints_ = ConstraintSet::none(g.n);
      mixing_hypers();
      resolve_phi_prior(false);
      break;
    case ModelKind::dean: {
      bool scaled = priors.scaled_dean;
      m.q_struct_ = scaled
                        ? m.structure_.q_star
                        : structured_besag(g, m.structure_.structured_index, ns);
      m.latent_dim_ = g.n + ns;
      identity_pred();
      m.constraints_ = shift_constraints(m.structure_.constraints, g.n, g.n + ns);
      m.struct_log_det_ = positive_log_det(m.q_struct_, k);
      mixing_hypers();
      resolve_phi_prior(scaled);
      break;
    }
    case ModelKind::bym2:
      m.q_struct_ = m.structure_.q_star;
      m.latent_dim_ = g.n + ns;
      identity_pred();
      m.constraints_ = shift_constraints(m.structure_.constraints, g.n, g.n + ns);
      m.struct_log_det_ = positive_log_det(m.q_struct_, k);
      mixing_hypers();
      resolve_phi_prior(true);
      break;
  }
  return m;
}

}  // namespace bym2
