#include "bym2/gaussian_approx.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "bym2/errors.hpp"

namespace bym2 {

PoissonLikelihood::PoissonLikelihood(const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& e) {
  if (y.size() != e.size()) throw error("counts and expected counts differ in length");
  for (int i = 0; i < y.size(); ++i) {
    if (y(i) < 0.0) throw error("negative count");
    if (e(i) <= 0.0) throw error("expected counts must be positive");
  }
  y_ = y;
  log_e_ = e.array().log();
  lgamma_y1_.resize(y.size());
  for (int i = 0; i < y.size(); ++i) lgamma_y1_(i) = std::lgamma(y(i) + 1.0);
}

double PoissonLikelihood::log_density(int i, double eta) const {
  double log_mean = log_e_(i) + eta;
  return y_(i) * log_mean - std::exp(log_mean) - lgamma_y1_(i);
}

double PoissonLikelihood::d1(int i, double eta) const {
  return y_(i) - std::exp(log_e_(i) + eta);
}

double PoissonLikelihood::d2(int i, double eta) const {
  return -std::exp(log_e_(i) + eta);
}

GaussianLikelihood::GaussianLikelihood(const Eigen::VectorXd& y, double sd)
    : y_(y), inv_var_(1.0 / (sd * sd)) {
  if (sd <= 0.0) throw error("noise sd must be positive");
}

double GaussianLikelihood::log_density(int i, double eta) const {
  double r = y_(i) - eta;
  return -0.5 * r * r * inv_var_ - 0.5 * std::log(2.0 * M_PI / inv_var_);
}

double GaussianLikelihood::d1(int i, double eta) const {
  return (y_(i) - eta) * inv_var_;
}

double GaussianLikelihood::d2(int, double) const { return -inv_var_; }

int approx_dim(const LatentModel& model, const FixedEffectsConfig& fe) {
  return model.latent_dim() + 1 + static_cast<int>(fe.z.cols());
}

ConstraintSet extended_constraints(const LatentModel& model,
                                   const FixedEffectsConfig& fe) {
  const ConstraintSet& c = model.constraints();
  int total = approx_dim(model, fe);
  if (c.count() == 0) return ConstraintSet::none(total);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(c.count(), total);
  a.block(0, 0, c.count(), c.dim()) = c.a;
  return ConstraintSet{a, c.e};
}

namespace {

struct Design {
  const LatentModel& model;
  const Likelihood& lik;
  const FixedEffectsConfig& fe;
  int n, d, p, dim;
  int mu_index;
  Triplets q_triplets;        // prior precision at theta, lower triangle
  SpMat q_full;               // both triangles, for quadratic forms
  Eigen::VectorXd prior_mean;
  ConstraintSet a_ext;

  Design(const LatentModel& m, const Likelihood& l,
         const FixedEffectsConfig& f, const Eigen::VectorXd& theta)
      : model(m), lik(l), fe(f) {
    n = l.n();
    if (n != m.n_regions()) throw error("likelihood and model disagree on the number of regions");
    if (f.z.cols() > 0 && f.z.rows() != n) throw error("covariate rows must match the number of regions");
    if (f.prior_variance <= 0.0) throw error("fixed-effect prior variance must be positive");
    d = m.latent_dim();
    p = static_cast<int>(f.z.cols());
    dim = d + 1 + p;
    mu_index = d;

    SymSparse q_model = m.precision(theta);
    q_triplets.reserve(q_model.lower.nonZeros() + 1 + p);
    for (int j = 0; j < q_model.lower.outerSize(); ++j)
      for (SpMat::InnerIterator it(q_model.lower, j); it; ++it)
        q_triplets.emplace_back(it.row(), it.col(), it.value());
    double fe_prec = 1.0 / f.prior_variance;
    for (int j = 0; j < 1 + p; ++j)
      q_triplets.emplace_back(d + j, d + j, fe_prec);
    q_full = SymSparse::from_triplets(dim, q_triplets).full();

    prior_mean = Eigen::VectorXd::Zero(dim);
    prior_mean(mu_index) = f.mu_prior_mean;
    a_ext = extended_constraints(m, f);
  }

  Eigen::VectorXd predictor(const Eigen::VectorXd& x) const {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, x(mu_index));
    for (int i = 0; i < n; ++i) {
      int li = model.pred_index()(i);
      if (li >= 0) eta(i) += x(li);
      for (int j = 0; j < p; ++j) eta(i) += fe.z(i, j) * x(d + 1 + j);
    }
    return eta;
  }

  // joint log density of (latent, fixed effects) up to the theta-dependent
  // normalization; -inf on overflow so damping rejects the candidate
  double objective(const Eigen::VectorXd& x, const Eigen::VectorXd& eta) const {
    double ll = 0.0;
    for (int i = 0; i < n; ++i) ll += lik.log_density(i, eta(i));
    if (!std::isfinite(ll)) return -std::numeric_limits<double>::infinity();
    Eigen::VectorXd c = x - prior_mean;
    return ll - 0.5 * c.dot(q_full * c);
  }

  // indices and weights of the predictor row for observation i
  void predictor_row(int i, std::vector<int>* idx,
                     std::vector<double>* w) const {
    idx->clear();
    w->clear();
    int li = model.pred_index()(i);
    if (li >= 0) {
      idx->push_back(li);
      w->push_back(1.0);
    }
    idx->push_back(mu_index);
    w->push_back(1.0);
    for (int j = 0; j < p; ++j) {
      idx->push_back(d + 1 + j);
      w->push_back(fe.z(i, j));
    }
  }

  SymSparse working_precision(const Eigen::VectorXd& eta) const {
    Triplets ts = q_triplets;
    std::vector<int> idx;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
      double curv = -lik.d2(i, eta(i));
      if (!(curv >= 0.0) || !std::isfinite(curv))
        throw numeric_error("likelihood curvature must be finite and nonpositive");
      predictor_row(i, &idx, &w);
      for (size_t a = 0; a < idx.size(); ++a)
        for (size_t b = 0; b <= a; ++b)
          ts.emplace_back(std::max(idx[a], idx[b]), std::min(idx[a], idx[b]),
                          curv * w[a] * w[b]);
    }
    return SymSparse::from_triplets(dim, ts);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& eta) const {
    Eigen::VectorXd g = -(q_full * (x - prior_mean));
    std::vector<int> idx;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
      double s = lik.d1(i, eta(i));
      predictor_row(i, &idx, &w);
      for (size_t a = 0; a < idx.size(); ++a) g(idx[a]) += s * w[a];
    }
    return g;
  }

  double constrained_grad_norm(const Eigen::VectorXd& g) const {
    if (a_ext.count() == 0) return g.norm();
    const Eigen::MatrixXd& a = a_ext.a;
    Eigen::MatrixXd gram = a * a.transpose();
    Eigen::VectorXd proj = g - a.transpose() * gram.ldlt().solve(a * g);
    return proj.norm();
  }
};

void factorize_with_retry(Cholesky& factor, const SymSparse& h) {
  try {
    factor.factorize(h);
  } catch (const not_positive_definite&) {
    double jitter = 1e-10 * h.mean_diagonal();
    factor.factorize(h, jitter);
  }
}

}  // namespace

ApproxResult gaussian_approx(const LatentModel& model, const Likelihood& lik,
                             const FixedEffectsConfig& fe,
                             const Eigen::VectorXd& theta, Cholesky& factor,
                             const ApproxOptions& opts,
                             const Eigen::VectorXd* warm_start) {
  Design design(model, lik, fe, theta);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(design.dim);
  if (warm_start != nullptr) {
    if (warm_start->size() != design.dim) throw error("warm start has the wrong dimension");
    x = *warm_start;
  }
  if (design.a_ext.count() > 0) {
    // least-squares projection onto the constraint plane; the Newton steps
    // then stay on it exactly
    const Eigen::MatrixXd& a = design.a_ext.a;
    Eigen::VectorXd violation = a * x - design.a_ext.e;
    x -= a.transpose() *
         Eigen::MatrixXd(a * a.transpose()).ldlt().solve(violation);
  }

  Eigen::VectorXd eta = design.predictor(x);
  double f_cur = design.objective(x, eta);
  if (!std::isfinite(f_cur)) throw numeric_error("objective is not finite at the start");

  bool converged = false;
  int steps = 0;
  double last_increment = std::numeric_limits<double>::quiet_NaN();
  while (true) {
    factorize_with_retry(factor, design.working_precision(eta));
    Eigen::VectorXd delta = factor.solve(design.gradient(x, eta));

    double alpha = 1.0;
    Eigen::VectorXd cand, cand_eta;
    double f_new = -std::numeric_limits<double>::infinity();
    double slack = 1e-10 * (1.0 + std::abs(f_cur));
    for (int h = 0; h <= opts.max_step_halvings; ++h) {
      cand = x + alpha * delta;
      kriging_correct(factor, design.a_ext, cand);
      cand_eta = design.predictor(cand);
      f_new = design.objective(cand, cand_eta);
      if (f_new >= f_cur - slack) break;
      alpha *= 0.5;
    }
    if (!std::isfinite(f_new))
      throw non_convergence("step halving could not restore a finite objective");

    last_increment = (cand_eta - eta).cwiseAbs().maxCoeff();
    x = cand;
    eta = cand_eta;
    f_cur = f_new;
    if (last_increment < opts.tolerance) {
      converged = true;
      break;
    }
    if (++steps >= opts.max_iterations) break;
  }
  if (!converged)
    throw non_convergence("Gaussian approximation did not converge: last max |delta eta| = " +
                          std::to_string(last_increment));

  // precision, determinant, and gradient belong to the accepted mode
  factorize_with_retry(factor, design.working_precision(eta));

  ApproxResult res;
  res.mode = x;
  res.eta = eta;
  res.iterations = steps;
  res.grad_norm = design.constrained_grad_norm(design.gradient(x, eta));
  res.log_det_h = constrained_log_det(factor, design.a_ext);

  double ll = 0.0;
  for (int i = 0; i < design.n; ++i) ll += lik.log_density(i, eta(i));
  res.log_lik = ll;
  Eigen::VectorXd c = x - design.prior_mean;
  double quad = c.dot(design.q_full * c);
  double prior_log_det = model.log_det_constrained(theta) -
                         (1 + design.p) * std::log(fe.prior_variance);
  res.log_post = ll - 0.5 * quad + 0.5 * prior_log_det - 0.5 * res.log_det_h +
                 model.log_prior_hyper(theta);
  return res;
}

PredictorMoments predictor_moments(const LatentModel& model,
                                   const FixedEffectsConfig& fe,
                                   const ApproxResult& res,
                                   const Cholesky& factor) {
  if (!factor.ready()) throw error("factor is not ready");
  int n = model.n_regions();
  int d = model.latent_dim();
  int p = static_cast<int>(fe.z.cols());
  int dim = d + 1 + p;
  if (factor.dim() != dim) throw error("factor dimension does not match the model");

  SelectedInverse z = factor.selected_inverse();
  ConstraintSet a_ext = extended_constraints(model, fe);
  int k = a_ext.count();
  Eigen::MatrixXd w;       // dim x k, solve of A'
  Eigen::LDLT<Eigen::MatrixXd> s_fac;
  if (k > 0) {
    w = factor.solve(Eigen::MatrixXd(a_ext.a.transpose()));
    s_fac.compute(a_ext.a * w);
  }

  std::vector<int> idx;
  std::vector<double> wt;
  auto corrected_var = [&](const std::vector<int>& ids,
                           const std::vector<double>& ws) {
    double v = 0.0;
    for (size_t a = 0; a < ids.size(); ++a)
      for (size_t b = 0; b < ids.size(); ++b)
        v += ws[a] * ws[b] * z(ids[a], ids[b]);
    if (k > 0) {
      Eigen::VectorXd wl = Eigen::VectorXd::Zero(k);
      for (size_t a = 0; a < ids.size(); ++a)
        wl += ws[a] * w.row(ids[a]).transpose();
      v -= wl.dot(s_fac.solve(wl));
    }
    return std::max(v, 0.0);
  };

  PredictorMoments out;
  out.mean = res.eta;
  out.sd.resize(n);
  for (int i = 0; i < n; ++i) {
    idx.clear();
    wt.clear();
    int li = model.pred_index()(i);
    if (li >= 0) {
      idx.push_back(li);
      wt.push_back(1.0);
    }
    idx.push_back(d);
    wt.push_back(1.0);
    for (int j = 0; j < p; ++j) {
      idx.push_back(d + 1 + j);
      wt.push_back(fe.z(i, j));
    }
    out.sd(i) = std::sqrt(corrected_var(idx, wt));
  }

  out.mu_mean = res.mode(d);
  out.mu_sd = std::sqrt(corrected_var({d}, {1.0}));
  out.beta_mean.resize(p);
  out.beta_sd.resize(p);
  for (int j = 0; j < p; ++j) {
    out.beta_mean(j) = res.mode(d + 1 + j);
    out.beta_sd(j) = std::sqrt(corrected_var({d + 1 + j}, {1.0}));
  }
  return out;
}

}  // namespace bym2
