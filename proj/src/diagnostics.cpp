#include "bym2/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bym2/errors.hpp"
#include "bym2/gauss_hermite.hpp"

namespace bym2 {

namespace {

double poisson_log_density(double y, double log_e, double eta, double lgamma_y1) {
  return y * (log_e + eta) - std::exp(log_e + eta) - lgamma_y1;
}

}  // namespace

double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& e,
                        const Eigen::VectorXd& eta) {
  if (y.size() != e.size() || y.size() != eta.size()) {
    throw error("poisson_deviance: size mismatch");
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    ll += poisson_log_density(y(i), std::log(e(i)), eta(i), std::lgamma(y(i) + 1.0));
  }
  return -2.0 * ll;
}

double log_score_from_cpo(const Eigen::VectorXd& cpo) {
  if (cpo.size() == 0) throw error("log_score_from_cpo: empty cpo");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < cpo.size(); ++i) acc += std::log(cpo(i));
  return -acc / static_cast<double>(cpo.size());
}

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& e,
            const Eigen::VectorXd& theta_hat) {
  if (y.size() != e.size() || y.size() != theta_hat.size()) {
    throw error("rmse: size mismatch");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double d = y(i) / e(i) - theta_hat(i);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

Diagnostics compute_diagnostics(const Eigen::VectorXd& y,
                                const Eigen::VectorXd& e,
                                const Eigen::VectorXd& weights,
                                const Eigen::MatrixXd& eta_means,
                                const Eigen::MatrixXd& eta_sds) {
  const Eigen::Index n = y.size();
  const Eigen::Index k = weights.size();
  if (e.size() != n) throw error("compute_diagnostics: y/e size mismatch");
  if (eta_means.rows() != k || eta_means.cols() != n ||
      eta_sds.rows() != k || eta_sds.cols() != n) {
    throw error("compute_diagnostics: moment matrices must be K x n");
  }
  if (k == 0) throw error("compute_diagnostics: empty grid");

  Diagnostics out;

  // Collapse each eta_i mixture to (m_i, s_i) so every lognormal summary is
  // derived from the same reported pair.
  Eigen::VectorXd m(n), s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mean = 0.0;
    double second = 0.0;
    for (Eigen::Index g = 0; g < k; ++g) {
      mean += weights(g) * eta_means(g, i);
      second += weights(g) *
                (eta_sds(g, i) * eta_sds(g, i) + eta_means(g, i) * eta_means(g, i));
    }
    m(i) = mean;
    s(i) = std::sqrt(std::max(0.0, second - mean * mean));
  }

  // DIC. E[D(eta)] only needs E[eta_i] and E[exp(eta_i)]; the latter comes
  // from the collapsed lognormal so it stays consistent with reported risks.
  double mean_dev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double log_e = std::log(e(i));
    double e_exp_eta = std::exp(m(i) + 0.5 * s(i) * s(i));
    mean_dev += y(i) * (log_e + m(i)) - e(i) * e_exp_eta - std::lgamma(y(i) + 1.0);
  }
  out.mean_deviance = -2.0 * mean_dev;
  out.deviance_at_mean = poisson_deviance(y, e, m);
  out.p_d = out.mean_deviance - out.deviance_at_mean;
  out.dic = out.mean_deviance + out.p_d;

  // CPO via the harmonic identity 1/cpo_i = sum_k w_k int pi(y_i|eta)^-1
  // N(eta; m_ik, s_ik^2) deta. Integrated literally the right tail of the
  // Gaussian beats exp(-E e^eta) and the integral diverges, so each inner
  // integral is evaluated in its stable equivalent form: divide the
  // likelihood's local Gaussian factor out of the marginal, leaving the
  // leave-one-out Gaussian N(m_loo, 1/lambda) with
  //   lambda = 1/s^2 - c,  m_loo = m - g/lambda,
  // (c, g the likelihood curvature and gradient at m), then
  //   cpo_ik = int pi(y_i|eta) N(eta; m_loo, 1/lambda) deta
  // by the 61-point Gauss-Hermite rule centered on the integrand's mode.
  // lambda <= 0 means the marginal carries less information than the single
  // observation; the identity has no finite value there, so the region is
  // flagged and reported missing.
  const GaussHermite& gh = gauss_hermite_61();
  const double sqrt2 = std::sqrt(2.0);
  out.cpo.resize(n);
  out.cpo_unstable.assign(static_cast<size_t>(n), 0);
  Eigen::VectorXd terms(gh.x.size());
  Eigen::VectorXd log_cpo_k(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double log_e = std::log(e(i));
    double lg = std::lgamma(y(i) + 1.0);
    bool bad = false;
    bool flagged = false;
    for (Eigen::Index g = 0; g < k && !bad; ++g) {
      double mi = eta_means(g, i);
      double si = eta_sds(g, i);
      if (si <= 0.0) {
        // point-mass marginal: the identity collapses to the plug-in density
        log_cpo_k(g) = poisson_log_density(y(i), log_e, mi, lg);
        continue;
      }
      double curv = std::exp(log_e + mi);
      double lambda = 1.0 / (si * si) - curv;
      if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        bad = true;
        break;
      }
      double m_loo = mi - (y(i) - curv) / lambda;

      // mode of log[pi(y|eta) N_loo(eta)]; strictly concave in eta
      double eta = mi;
      for (int it = 0; it < 200; ++it) {
        double ee = std::exp(log_e + eta);
        double step = (y(i) - ee - lambda * (eta - m_loo)) / (ee + lambda);
        step = std::min(5.0, std::max(-5.0, step));
        eta += step;
        if (std::abs(step) < 1e-12 * (1.0 + std::abs(eta))) break;
      }
      double h = 1.0 / std::sqrt(std::exp(log_e + eta) + lambda);

      for (Eigen::Index j = 0; j < gh.x.size(); ++j) {
        double ej = eta + sqrt2 * h * gh.x(j);
        double psi = poisson_log_density(y(i), log_e, ej, lg) -
                     0.5 * lambda * (ej - m_loo) * (ej - m_loo) +
                     0.5 * std::log(lambda) - 0.5 * std::log(2.0 * M_PI);
        terms(j) = std::log(gh.w(j)) + gh.x(j) * gh.x(j) + psi;
      }
      double top = terms.maxCoeff();
      if (!std::isfinite(top)) {
        bad = true;
        break;
      }
      double sum = (terms.array() - top).exp().sum();
      log_cpo_k(g) = std::log(sqrt2 * h) + top + std::log(sum);
      if (1.0 / sum > 0.9) flagged = true;
    }
    if (bad) {
      out.cpo(i) = std::numeric_limits<double>::quiet_NaN();
      out.cpo_unstable[static_cast<size_t>(i)] = 1;
      continue;
    }
    // harmonic mix over the grid
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index g = 0; g < k; ++g) {
      top = std::max(top, std::log(weights(g)) - log_cpo_k(g));
    }
    double sum = 0.0;
    for (Eigen::Index g = 0; g < k; ++g) {
      sum += std::exp(std::log(weights(g)) - log_cpo_k(g) - top);
    }
    out.cpo(i) = std::exp(-(top + std::log(sum)));
    if (flagged) out.cpo_unstable[static_cast<size_t>(i)] = 1;
  }

  bool all_finite = out.cpo.allFinite();
  out.log_score = all_finite ? log_score_from_cpo(out.cpo)
                             : std::numeric_limits<double>::quiet_NaN();

  Eigen::VectorXd theta_hat(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    theta_hat(i) = std::exp(m(i) + 0.5 * s(i) * s(i));
  }
  out.rmse = rmse(y, e, theta_hat);
  return out;
}

}  // namespace bym2
