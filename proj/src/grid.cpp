#include "bym2/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bym2/cholesky.hpp"
#include "bym2/errors.hpp"

namespace bym2 {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Internal-scale box; evaluations outside count as zero posterior mass.
constexpr double kThetaBound = 30.0;

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

struct Objective {
  const LatentModel& model;
  const PoissonLikelihood& lik;
  const FixedEffectsConfig& fe;
  ApproxOptions opts;
};

struct EvalOut {
  double lp = -kInf;
  int iterations = 0;
  double grad_norm = 0.0;
  Eigen::VectorXd mode;
  bool ok = false;
};

EvalOut evaluate_theta(const Objective& obj, const Eigen::VectorXd& theta,
                       Cholesky& factor, const Eigen::VectorXd* warm) {
  EvalOut out;
  if (theta.cwiseAbs().maxCoeff() > kThetaBound) return out;
  try {
    ApproxResult res =
        gaussian_approx(obj.model, obj.lik, obj.fe, theta, factor, obj.opts, warm);
    out.iterations = res.iterations;
    out.grad_norm = res.grad_norm;
    out.mode = std::move(res.mode);
    out.ok = std::isfinite(res.log_post);
    if (out.ok) out.lp = res.log_post;
  } catch (const error&) {
    // failed evaluation: keep lp at -inf, the caller counts it
  }
  return out;
}

// body(task_index, worker_factor). Tasks write to disjoint slots, so the
// result is independent of scheduling; reductions happen after the join.
template <typename Body>
void run_parallel(int n_tasks, int n_threads, const Body& body) {
  int t = std::max(1, std::min(n_threads, n_tasks));
  if (t == 1) {
    Cholesky factor;
    for (int i = 0; i < n_tasks; ++i) body(i, factor);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<size_t>(t));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      Cholesky factor;
      try {
        for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
          body(i, factor);
        }
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& ep : errors) {
    if (ep) std::rethrow_exception(ep);
  }
}

struct ModeSearch {
  Eigen::VectorXd theta;
  double lp = -kInf;
  Eigen::VectorXd warm;  // latent mode at the best evaluation
  int evaluations = 0;
  int newton_iterations = 0;
};

// Derivative-free ascent (Nelder-Mead on -lp). Warm starts chain from the
// best evaluation so far; the search is sequential and deterministic.
ModeSearch hyper_mode_search(const Objective& obj, const Eigen::VectorXd& start,
                             const GridConfig& cfg, Cholesky& factor) {
  const int d = static_cast<int>(start.size());
  const int m = d + 1;
  ModeSearch st;

  auto value = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd* warm = st.warm.size() > 0 ? &st.warm : nullptr;
    EvalOut r = evaluate_theta(obj, th, factor, warm);
    ++st.evaluations;
    st.newton_iterations += r.iterations;
    if (r.ok && r.lp > st.lp) {
      st.lp = r.lp;
      st.warm = std::move(r.mode);
    }
    return r.ok ? -r.lp : kInf;
  };

  std::vector<Eigen::VectorXd> x(static_cast<size_t>(m));
  Eigen::VectorXd f(m);
  x[0] = start;
  f(0) = value(start);
  if (!std::isfinite(f(0))) {
    throw non_convergence("hyper mode search failed at the starting point");
  }
  for (int i = 0; i < d; ++i) {
    x[static_cast<size_t>(i + 1)] = start;
    x[static_cast<size_t>(i + 1)](i) += 1.0;
    f(i + 1) = value(x[static_cast<size_t>(i + 1)]);
  }

  std::vector<int> ord(static_cast<size_t>(m));
  for (int it = 0; it < cfg.nm_max_iterations; ++it) {
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](int a, int b) { return f(a) < f(b); });
    std::vector<Eigen::VectorXd> xs(static_cast<size_t>(m));
    Eigen::VectorXd fs(m);
    for (int i = 0; i < m; ++i) {
      xs[static_cast<size_t>(i)] = x[static_cast<size_t>(ord[static_cast<size_t>(i)])];
      fs(i) = f(ord[static_cast<size_t>(i)]);
    }
    x = std::move(xs);
    f = fs;

    double diameter = 0.0;
    for (int i = 1; i < m; ++i) {
      diameter = std::max(
          diameter, (x[static_cast<size_t>(i)] - x[0]).cwiseAbs().maxCoeff());
    }
    if (diameter < cfg.nm_tolerance) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < m - 1; ++i) centroid += x[static_cast<size_t>(i)];
    centroid /= static_cast<double>(m - 1);
    const Eigen::VectorXd& worst = x[static_cast<size_t>(m - 1)];

    Eigen::VectorXd xr = centroid + (centroid - worst);
    double fr = value(xr);
    if (fr < f(0)) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst);
      double fe = value(xe);
      if (fe < fr) {
        x[static_cast<size_t>(m - 1)] = xe;
        f(m - 1) = fe;
      } else {
        x[static_cast<size_t>(m - 1)] = xr;
        f(m - 1) = fr;
      }
    } else if (fr < f(m - 2)) {
      x[static_cast<size_t>(m - 1)] = xr;
      f(m - 1) = fr;
    } else {
      bool outside = fr < f(m - 1);
      Eigen::VectorXd xc =
          outside ? (centroid + 0.5 * (xr - centroid)).eval()
                  : (centroid + 0.5 * (worst - centroid)).eval();
      double fc = value(xc);
      if (fc < (outside ? fr : f(m - 1))) {
        x[static_cast<size_t>(m - 1)] = xc;
        f(m - 1) = fc;
      } else {
        for (int i = 1; i < m; ++i) {
          x[static_cast<size_t>(i)] = x[0] + 0.5 * (x[static_cast<size_t>(i)] - x[0]);
          f(i) = value(x[static_cast<size_t>(i)]);
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i < m; ++i) {
    if (f(i) < f(best)) best = i;
  }
  if (!std::isfinite(f(best))) {
    throw non_convergence("hyper mode search found no finite point");
  }
  st.theta = x[static_cast<size_t>(best)];
  st.lp = -f(best);
  return st;
}

// Central-difference Hessian of -lp at the located mode.
Eigen::MatrixXd fd_hessian(const Objective& obj, const Eigen::VectorXd& mode,
                           double lp0, double h, Cholesky& factor,
                           const Eigen::VectorXd& warm, int& evaluations,
                           int& newton_iterations) {
  const int d = static_cast<int>(mode.size());
  auto value = [&](Eigen::VectorXd th) {
    EvalOut r = evaluate_theta(obj, th, factor, &warm);
    ++evaluations;
    newton_iterations += r.iterations;
    if (!r.ok) {
      throw non_convergence("curvature evaluation failed near the hyper mode");
    }
    return r.lp;
  };
  auto shifted = [&](int i, double si, int j, double sj) {
    Eigen::VectorXd th = mode;
    th(i) += si * h;
    if (j >= 0) th(j) += sj * h;
    return th;
  };

  Eigen::MatrixXd hess(d, d);
  for (int i = 0; i < d; ++i) {
    double fp = value(shifted(i, 1.0, -1, 0.0));
    double fm = value(shifted(i, -1.0, -1, 0.0));
    hess(i, i) = -(fp + fm - 2.0 * lp0) / (h * h);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      double fpp = value(shifted(i, 1.0, j, 1.0));
      double fpm = value(shifted(i, 1.0, j, -1.0));
      double fmp = value(shifted(i, -1.0, j, 1.0));
      double fmm = value(shifted(i, -1.0, j, -1.0));
      hess(i, j) = hess(j, i) = -(fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return hess;
}

struct RawPoint {
  std::vector<int> iz;
  Eigen::VectorXd theta;
  double lp = -kInf;
  int iterations = 0;
  Eigen::VectorXd mode;
  bool ok = false;
};

double weighted_mean(const Eigen::VectorXd& values, const Eigen::VectorXd& w) {
  return (values.array() * w.array()).sum();
}

double weighted_sd(const Eigen::VectorXd& values, const Eigen::VectorXd& w,
                   double mean) {
  double second = (values.array().square() * w.array()).sum();
  return std::sqrt(std::max(0.0, second - mean * mean));
}

// Summary of a Gaussian mixture: moments in closed form, quantiles by
// bisection of the mixture CDF, mode by a two-stage density scan.
SummaryStats mixture_summary(const std::string& name, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& m, const Eigen::VectorXd& s) {
  SummaryStats out;
  out.name = name;
  out.mean = weighted_mean(m, w);
  double second = ((m.array().square() + s.array().square()) * w.array()).sum();
  out.sd = std::sqrt(std::max(0.0, second - out.mean * out.mean));
  if (out.sd <= 0.0) {
    out.q025 = out.median = out.q975 = out.mode = out.mean;
    return out;
  }

  auto cdf = [&](double q) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      acc += w(k) * (s(k) > 0.0 ? normal_cdf((q - m(k)) / s(k))
                                : (q >= m(k) ? 1.0 : 0.0));
    }
    return acc;
  };
  auto quantile = [&](double p) {
    double lo = (m.array() - 10.0 * s.array().max(1e-12)).minCoeff();
    double hi = (m.array() + 10.0 * s.array().max(1e-12)).maxCoeff();
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi));
         ++it) {
      double mid = 0.5 * (lo + hi);
      (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  out.q025 = quantile(0.025);
  out.median = quantile(0.5);
  out.q975 = quantile(0.975);

  auto density = [&](double q) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      if (s(k) <= 0.0) continue;
      double t = (q - m(k)) / s(k);
      acc += w(k) * std::exp(-0.5 * t * t) / s(k);
    }
    return acc;
  };
  double lo = out.mean - 5.0 * out.sd;
  double hi = out.mean + 5.0 * out.sd;
  double best_q = out.mean;
  for (int stage = 0; stage < 3; ++stage) {
    const int cells = 512;
    double step = (hi - lo) / cells;
    double best_f = -kInf;
    for (int i = 0; i <= cells; ++i) {
      double q = lo + step * i;
      double fq = density(q);
      if (fq > best_f) {
        best_f = fq;
        best_q = q;
      }
    }
    lo = best_q - step;
    hi = best_q + step;
  }
  out.mode = best_q;
  return out;
}

}  // namespace

double weighted_quantile(const Eigen::VectorXd& values,
                         const Eigen::VectorXd& weights, double q) {
  if (values.size() == 0 || values.size() != weights.size()) {
    throw error("weighted_quantile: bad sizes");
  }
  q = std::min(1.0, std::max(0.0, q));
  const Eigen::Index n = values.size();
  std::vector<int> ord(static_cast<size_t>(n));
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](int a, int b) { return values(a) < values(b); });
  // midpoint rule: atom i sits at cumulative mass c_i - w_i/2
  double cum = 0.0;
  double prev_f = -1.0, prev_v = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = weights(ord[static_cast<size_t>(i)]);
    double v = values(ord[static_cast<size_t>(i)]);
    double f = cum + 0.5 * w;
    cum += w;
    if (i == 0 && q <= f) return v;
    if (q <= f) {
      if (f <= prev_f) return v;
      double t = (q - prev_f) / (f - prev_f);
      return prev_v + t * (v - prev_v);
    }
    prev_f = f;
    prev_v = v;
  }
  return values(ord[static_cast<size_t>(n - 1)]);
}

FitResult fit(const LatentModel& model, const Dataset& data,
              const GridConfig& cfg) {
  data.validate();
  if (data.n() != model.n_regions()) {
    throw error("dataset size does not match the model graph");
  }
  if (cfg.dz <= 0.0 || cfg.diff_logdens <= 0.0 || cfg.max_points < 1) {
    throw error("grid configuration must be positive");
  }

  PoissonLikelihood lik(data.y, data.e);
  FixedEffectsConfig fe;
  fe.z = data.z;
  fe.prior_variance = cfg.fe_prior_variance;
  fe.mu_prior_mean = cfg.mu_prior_mean;
  Objective obj{model, lik, fe, cfg.approx};

  const int d = model.n_hypers();
  const int n = model.n_regions();
  const int p = static_cast<int>(data.z.cols());
  int threads = cfg.threads > 0
                    ? cfg.threads
                    : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));

  FitResult out;
  out.kind = model.kind();

  // ---- phase 0: hyper mode and local curvature -------------------------
  Cholesky seq_factor;
  ModeSearch ms = hyper_mode_search(obj, model.initial_theta(), cfg, seq_factor);
  out.nm_evaluations = ms.evaluations;
  out.newton_iterations_total = ms.newton_iterations;
  out.theta_mode = ms.theta;

  int extra_evals = 0;
  Eigen::MatrixXd hess = fd_hessian(obj, ms.theta, ms.lp, cfg.hessian_step,
                                    seq_factor, ms.warm, extra_evals,
                                    out.newton_iterations_total);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  if (es.info() != Eigen::Success) {
    throw numeric_error("hyper Hessian eigendecomposition failed");
  }
  Eigen::VectorXd scale(d);
  for (int i = 0; i < d; ++i) {
    double lambda = es.eigenvalues()(i);
    scale(i) = lambda > 1e-8 ? std::min(1.0 / std::sqrt(lambda), cfg.scale_cap)
                             : cfg.scale_cap;
  }
  Eigen::MatrixXd direction = es.eigenvectors() * scale.asDiagonal();

  // ---- phase 1: breadth-first grid exploration -------------------------
  auto theta_at = [&](const std::vector<int>& iz) {
    Eigen::VectorXd zr(d);
    for (int i = 0; i < d; ++i) zr(i) = cfg.dz * iz[static_cast<size_t>(i)];
    return (ms.theta + direction * zr).eval();
  };

  std::vector<RawPoint> pts;
  std::map<std::vector<int>, int> seen;
  std::vector<int> frontier;
  {
    RawPoint origin;
    origin.iz.assign(static_cast<size_t>(d), 0);
    origin.theta = ms.theta;
    seen[origin.iz] = 0;
    pts.push_back(std::move(origin));
    frontier.push_back(0);
  }

  double best_lp = -kInf;
  const Eigen::VectorXd warm_mode = ms.warm;
  std::atomic<long> newton_count{0};
  std::atomic<int> failed_count{0};

  while (!frontier.empty()) {
    const std::vector<int> batch = frontier;
    run_parallel(static_cast<int>(batch.size()), threads,
                 [&](int task, Cholesky& factor) {
                   RawPoint& pt = pts[static_cast<size_t>(
                       batch[static_cast<size_t>(task)])];
                   EvalOut r = evaluate_theta(obj, pt.theta, factor, &warm_mode);
                   pt.lp = r.lp;
                   pt.iterations = r.iterations;
                   pt.mode = std::move(r.mode);
                   pt.ok = r.ok;
                   newton_count.fetch_add(r.iterations);
                   if (!r.ok) failed_count.fetch_add(1);
                 });
    for (int idx : batch) {
      best_lp = std::max(best_lp, pts[static_cast<size_t>(idx)].lp);
    }
    if (!std::isfinite(best_lp)) {
      throw non_convergence("posterior evaluation failed at the hyper mode");
    }

    frontier.clear();
    for (int idx : batch) {
      // copy: push_back below may reallocate pts
      const std::vector<int> base_iz = pts[static_cast<size_t>(idx)].iz;
      const bool ok = pts[static_cast<size_t>(idx)].ok;
      const double lp = pts[static_cast<size_t>(idx)].lp;
      if (!ok || lp < best_lp - cfg.diff_logdens) continue;
      for (int j = 0; j < d; ++j) {
        for (int sign : {-1, 1}) {
          std::vector<int> niz = base_iz;
          niz[static_cast<size_t>(j)] += sign;
          if (seen.count(niz)) continue;
          if (static_cast<int>(pts.size()) >= cfg.max_points) {
            out.truncated = true;
            continue;
          }
          seen[niz] = static_cast<int>(pts.size());
          RawPoint np;
          np.iz = niz;
          np.theta = theta_at(niz);
          pts.push_back(std::move(np));
          frontier.push_back(seen[niz]);
        }
      }
    }
  }
  out.newton_iterations_total += static_cast<int>(newton_count.load());
  out.evaluated_points = static_cast<int>(pts.size());
  out.failed_points = failed_count.load();
  out.log_post_mode = best_lp;

  std::vector<int> retained;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
    const RawPoint& pt = pts[static_cast<size_t>(i)];
    if (pt.ok && pt.lp >= best_lp - cfg.diff_logdens) retained.push_back(i);
  }
  std::sort(retained.begin(), retained.end(), [&](int a, int b) {
    return pts[static_cast<size_t>(a)].iz < pts[static_cast<size_t>(b)].iz;
  });

  // ---- phase 2: latent moments at every retained point -----------------
  const int k0 = static_cast<int>(retained.size());
  std::vector<PredictorMoments> moments(static_cast<size_t>(k0));
  std::vector<double> grad_norms(static_cast<size_t>(k0), 0.0);
  std::vector<int> phase2_ok(static_cast<size_t>(k0), 0);
  std::atomic<long> newton2{0};
  run_parallel(k0, threads, [&](int task, Cholesky& factor) {
    const RawPoint& pt = pts[static_cast<size_t>(retained[static_cast<size_t>(task)])];
    try {
      ApproxResult res = gaussian_approx(obj.model, obj.lik, obj.fe, pt.theta,
                                         factor, obj.opts, &pt.mode);
      moments[static_cast<size_t>(task)] =
          predictor_moments(obj.model, obj.fe, res, factor);
      grad_norms[static_cast<size_t>(task)] = res.grad_norm;
      phase2_ok[static_cast<size_t>(task)] = 1;
      newton2.fetch_add(res.iterations);
    } catch (const error&) {
      // dropped below; weights are normalized over the survivors
    }
  });
  out.newton_iterations_total += static_cast<int>(newton2.load());

  std::vector<int> kept;
  for (int t = 0; t < k0; ++t) {
    if (phase2_ok[static_cast<size_t>(t)]) {
      kept.push_back(t);
    } else {
      ++out.failed_points;
    }
  }
  const int k = static_cast<int>(kept.size());
  if (k == 0) throw non_convergence("no usable grid points");
  out.grid_size = k;

  // ---- weights and grid records ----------------------------------------
  Eigen::VectorXd w(k);
  out.grid.resize(static_cast<size_t>(k));
  Eigen::MatrixXd eta_means(k, n), eta_sds(k, n);
  Eigen::VectorXd mu_means(k), mu_sds(k);
  Eigen::MatrixXd beta_means(k, p), beta_sds(k, p);
  int mode_at = 0;
  for (int t = 0; t < k; ++t) {
    int task = kept[static_cast<size_t>(t)];
    const RawPoint& pt = pts[static_cast<size_t>(retained[static_cast<size_t>(task)])];
    const PredictorMoments& pm = moments[static_cast<size_t>(task)];
    GridPoint& gp = out.grid[static_cast<size_t>(t)];
    gp.theta = pt.theta;
    gp.theta_user = model.theta_to_user(pt.theta);
    gp.z.resize(d);
    for (int i = 0; i < d; ++i) gp.z(i) = cfg.dz * pt.iz[static_cast<size_t>(i)];
    gp.log_post = pt.lp;
    w(t) = std::exp(pt.lp - best_lp);
    eta_means.row(t) = pm.mean.transpose();
    eta_sds.row(t) = pm.sd.transpose();
    mu_means(t) = pm.mu_mean;
    mu_sds(t) = pm.mu_sd;
    if (p > 0) {
      beta_means.row(t) = pm.beta_mean.transpose();
      beta_sds.row(t) = pm.beta_sd.transpose();
    }
    out.max_grad_norm = std::max(out.max_grad_norm, grad_norms[static_cast<size_t>(task)]);
    if (pt.lp > out.grid[static_cast<size_t>(mode_at)].log_post) mode_at = t;
  }
  w /= w.sum();
  for (int t = 0; t < k; ++t) out.grid[static_cast<size_t>(t)].weight = w(t);

  // ---- summaries --------------------------------------------------------
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd values(k);
    for (int t = 0; t < k; ++t) values(t) = out.grid[static_cast<size_t>(t)].theta_user(j);
    SummaryStats row;
    row.name = model.hypers()[static_cast<size_t>(j)].name;
    row.mean = weighted_mean(values, w);
    row.sd = weighted_sd(values, w, row.mean);
    row.q025 = weighted_quantile(values, w, 0.025);
    row.median = weighted_quantile(values, w, 0.5);
    row.q975 = weighted_quantile(values, w, 0.975);
    row.mode = values(mode_at);
    out.hyper.push_back(std::move(row));
  }

  out.intercept = mixture_summary("mu", w, mu_means, mu_sds);
  for (int j = 0; j < p; ++j) {
    out.beta.push_back(mixture_summary("beta[" + std::to_string(j + 1) + "]", w,
                                       beta_means.col(j), beta_sds.col(j)));
  }

  out.eta_mean.resize(n);
  out.eta_sd.resize(n);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0, second = 0.0;
    for (int t = 0; t < k; ++t) {
      mean += w(t) * eta_means(t, i);
      second += w(t) * (eta_sds(t, i) * eta_sds(t, i) + eta_means(t, i) * eta_means(t, i));
    }
    out.eta_mean(i) = mean;
    out.eta_sd(i) = std::sqrt(std::max(0.0, second - mean * mean));
  }
  // scalar std::exp so reported risks reproduce the lognormal identity
  // exactly when recomputed from (eta_mean, eta_sd)
  out.risk_mean.resize(n);
  out.risk_sd.resize(n);
  for (int i = 0; i < n; ++i) {
    double s2 = out.eta_sd(i) * out.eta_sd(i);
    out.risk_mean(i) = std::exp(out.eta_mean(i) + 0.5 * s2);
    out.risk_sd(i) = out.risk_mean(i) * std::sqrt(std::expm1(s2));
  }

  out.diagnostics = compute_diagnostics(data.y, data.e, w, eta_means, eta_sds);
  return out;
}

}  // namespace bym2
