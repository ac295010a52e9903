#include <cmath>
#include <functional>

#include "bym2/cholesky.hpp"
#include "bym2/gauss_hermite.hpp"
#include "bym2/graph.hpp"
#include "bym2/priors.hpp"
#include "bym2/rng.hpp"
#include "bym2/scaling.hpp"
#include "doctest.h"
#include "reference_values.hpp"

using namespace bym2;

namespace {

Graph path_graph(int n) {
  Graph g;
  g.n = n;
  g.neighbours.assign(n, {});
  for (int i = 0; i + 1 < n; ++i) {
    g.neighbours[i].push_back(i + 1);
    g.neighbours[i + 1].push_back(i);
  }
  return g;
}

Graph lattice_rook(int rows, int cols) {
  Graph g;
  g.n = rows * cols;
  g.neighbours.assign(g.n, {});
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (r + 1 < rows) {
        g.neighbours[id(r, c)].push_back(id(r + 1, c));
        g.neighbours[id(r + 1, c)].push_back(id(r, c));
      }
      if (c + 1 < cols) {
        g.neighbours[id(r, c)].push_back(id(r, c + 1));
        g.neighbours[id(r, c + 1)].push_back(id(r, c));
      }
    }
  for (auto& nb : g.neighbours) std::sort(nb.begin(), nb.end());
  return g;
}

double simpson(const std::function<double(double)>& f, double a, double b,
               int intervals) {
  if (intervals % 2) ++intervals;
  double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i)
    s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Normalization of a pc phi prior: body quadrature on the logit scale up to
// x_hi plus the closed-form tail beyond it.
double phi_total_mass(const PhiPriorTable& t, double x_hi = 10.0) {
  double body = simpson(
      [&](double x) { return std::exp(t.log_density_internal(x)); }, -23.0,
      x_hi, 4000);
  return body + t.tail_mass(1.0 / (1.0 + std::exp(-x_hi)));
}

double phi_cdf_quadrature(const PhiPriorTable& t, double u) {
  double xu = std::log(u) - std::log1p(-u);
  return simpson(
      [&](double x) { return std::exp(t.log_density_internal(x)); }, -23.0,
      xu, 4000);
}

}  // namespace

TEST_CASE("pc precision prior: theta calibration and density values") {
  PrecPrior p1 = PrecPrior::pc(1.0, 0.01);
  CHECK(p1.theta == doctest::Approx(ref::theta_u1_a001).epsilon(1e-9));
  PrecPrior p2 = PrecPrior::pc(0.2 / 0.31, 0.1);
  CHECK(p2.theta == doctest::Approx(ref::theta_sard).epsilon(1e-9));

  // density at tau=1 with theta=1: (1/2) e^-1
  CHECK(pc_prec_log_density(1.0, 1.0) ==
        doctest::Approx(std::log(0.5 * std::exp(-1.0))).epsilon(1e-12));
  CHECK(std::exp(pc_prec_log_density(1.0, 1.0)) ==
        doctest::Approx(0.183940).epsilon(1e-5));
}

TEST_CASE("pc precision prior: normalization and tail probability") {
  for (auto [u, a] : {std::pair{1.0, 0.01}, std::pair{0.2 / 0.31, 0.1}}) {
    PrecPrior p = PrecPrior::pc(u, a);
    double total = simpson(
        [&](double t) { return std::exp(p.log_density_internal(t)); }, -60.0,
        60.0, 40000);
    CHECK(std::abs(total - 1.0) < 1e-8);

    // Prob(sigma > U) = Prob(tau < U^-2)
    double below = simpson(
        [&](double t) { return std::exp(p.log_density_internal(t)); }, -60.0,
        std::log(1.0 / (u * u)), 40000);
    CHECK(std::abs(below - a) < 1e-8);
  }
}

TEST_CASE("gamma precision prior: density and internal-scale consistency") {
  PrecPrior g = PrecPrior::gamma(1.0, 0.02);
  // shape/rate mean = 50; density at tau: rate * exp(-rate tau) for shape 1
  CHECK(g.log_density(3.0) ==
        doctest::Approx(std::log(0.02) - 0.02 * 3.0).epsilon(1e-12));
  CHECK(g.log_density_internal(std::log(3.0)) ==
        doctest::Approx(g.log_density(3.0) + std::log(3.0)).epsilon(1e-12));
  double total = simpson(
      [&](double t) { return std::exp(g.log_density_internal(t)); }, -40.0,
      40.0, 40000);
  CHECK(std::abs(total - 1.0) < 1e-8);
}

TEST_CASE("phi distance: frozen oracle values") {
  Eigen::VectorXd gt2 = gamma_tilde(scale_structured(path_graph(2)));
  CHECK(phi_kld(0.5, gt2) == doctest::Approx(ref::p2_kld_half).epsilon(1e-6));
  CHECK(phi_distance(0.5, gt2) ==
        doctest::Approx(ref::p2_dist_half).epsilon(1e-6));

  Eigen::VectorXd gt3 = gamma_tilde(scale_structured(path_graph(3)));
  CHECK(phi_kld(0.5, gt3) == doctest::Approx(ref::p3_kld_half).epsilon(1e-6));
  CHECK(phi_distance(0.5, gt3) ==
        doctest::Approx(ref::p3_dist_half).epsilon(1e-6));

  Eigen::VectorXd gt6 = gamma_tilde(scale_structured(lattice_rook(6, 6)));
  CHECK(phi_kld(0.5, gt6) == doctest::Approx(ref::lat6_kld_half).epsilon(1e-6));
  CHECK(phi_distance(0.5, gt6) ==
        doctest::Approx(ref::lat6_dist_half).epsilon(1e-6));
}

TEST_CASE("phi lambda calibration: frozen oracle values") {
  Eigen::VectorXd gt2 = gamma_tilde(scale_structured(path_graph(2)));
  CHECK(calibrate_lambda(gt2, 0.5, 2.0 / 3.0) ==
        doctest::Approx(ref::p2_lambda_a23).epsilon(1e-6));
  CHECK(calibrate_lambda(gt2, 0.5, 0.5) ==
        doctest::Approx(ref::p2_lambda_a12).epsilon(1e-6));
  CHECK(calibrate_lambda(gt2, 0.5, 0.1) ==
        doctest::Approx(ref::p2_lambda_a01).epsilon(1e-6));

  Eigen::VectorXd gt3 = gamma_tilde(scale_structured(path_graph(3)));
  CHECK(calibrate_lambda(gt3, 0.5, 2.0 / 3.0) ==
        doctest::Approx(ref::p3_lambda_a23).epsilon(1e-6));
  CHECK(calibrate_lambda(gt3, 0.5, 0.5) ==
        doctest::Approx(ref::p3_lambda_a12).epsilon(1e-6));
  CHECK(calibrate_lambda(gt3, 0.5, 0.1) ==
        doctest::Approx(ref::p3_lambda_a01).epsilon(1e-6));

  Eigen::VectorXd gt6 = gamma_tilde(scale_structured(lattice_rook(6, 6)));
  CHECK(calibrate_lambda(gt6, 0.5, 2.0 / 3.0) ==
        doctest::Approx(ref::lat6_lambda_a23).epsilon(1e-6));
  CHECK(calibrate_lambda(gt6, 0.5, 0.5) ==
        doctest::Approx(ref::lat6_lambda_a12).epsilon(1e-6));
  CHECK(calibrate_lambda(gt6, 0.5, 0.1) ==
        doctest::Approx(ref::lat6_lambda_a01).epsilon(1e-6));

  // lambda is monotone in alpha and vanishes as alpha -> 0+
  CHECK(calibrate_lambda(gt2, 0.5, 1e-4) < calibrate_lambda(gt2, 0.5, 1e-2));
  CHECK(calibrate_lambda(gt2, 0.5, 1e-8) < 1e-7);
}

TEST_CASE("phi KLD eigenvalue form equals dense-matrix KLD") {
  RngStream rng(8888);
  for (int rep = 0; rep < 6; ++rep) {
    int n = 4 + static_cast<int>(rng.uniform() * 16);
    // random connected graph via spanning tree plus extras
    Graph g;
    g.n = n;
    g.neighbours.assign(n, {});
    for (int i = 1; i < n; ++i) {
      int j = static_cast<int>(rng.uniform() * i);
      g.neighbours[i].push_back(j);
      g.neighbours[j].push_back(i);
    }
    for (auto& nb : g.neighbours) std::sort(nb.begin(), nb.end());

    ScaledStructure s = scale_structured(g);
    Eigen::VectorXd gt = gamma_tilde(s);
    Eigen::MatrixXd pinv =
        dense_pseudo_inverse(s.q_star.dense(), s.rank_deficiency);
    for (double phi : {0.05, 0.3, 0.5, 0.8, 0.95}) {
      Eigen::MatrixXd sigma =
          (1.0 - phi) * Eigen::MatrixXd::Identity(n, n) + phi * pinv;
      Eigen::VectorXd ev = eigenvalues_sym(sigma);
      double dense_kld =
          0.5 * (sigma.trace() - n - ev.array().log().sum());
      CHECK(std::abs(phi_kld(phi, gt) - dense_kld) < 1e-10);
    }
  }
}

TEST_CASE("phi pc prior: normalization with closed-form tail") {
  struct Case {
    Eigen::VectorXd gt;
    double alpha;
  };
  Eigen::VectorXd gt2 = gamma_tilde(scale_structured(path_graph(2)));
  Eigen::VectorXd gt3 = gamma_tilde(scale_structured(path_graph(3)));
  Eigen::VectorXd gt6 = gamma_tilde(scale_structured(lattice_rook(6, 6)));
  for (const auto& gt : {gt2, gt3, gt6}) {
    for (double alpha : {2.0 / 3.0, 0.5, 0.1}) {
      PhiPriorTable t = PhiPriorTable::pc_from_gamma_tilde(gt, 0.5, alpha);
      CHECK(std::abs(phi_total_mass(t) - 1.0) < 1e-3);
      // CDF at U: quadrature within 1e-6, analytic exact
      CHECK(std::abs(phi_cdf_quadrature(t, 0.5) - alpha) < 1e-6);
      CHECK(t.cdf(0.5) == doctest::Approx(alpha).epsilon(1e-12));
    }
  }
  // the heavy right tail for alpha = 0.1 is real mass, not error
  PhiPriorTable t2 = PhiPriorTable::pc_from_gamma_tilde(gt2, 0.5, 0.1);
  CHECK(t2.tail_mass(1.0 - 1e-12) == doctest::Approx(ref::p2_tail_a01).epsilon(5e-3));
  PhiPriorTable t6 = PhiPriorTable::pc_from_gamma_tilde(gt6, 0.5, 0.1);
  CHECK(t6.tail_mass(1.0 - 1e-12) ==
        doctest::Approx(ref::lat6_tail_a01).epsilon(5e-3));
}

TEST_CASE("phi pc prior: table reproduces direct evaluation within 1e-6") {
  Eigen::VectorXd gt3 = gamma_tilde(scale_structured(path_graph(3)));
  Eigen::VectorXd gt6 = gamma_tilde(scale_structured(lattice_rook(6, 6)));
  for (const auto& gt : {gt3, gt6}) {
    PhiPriorTable t = PhiPriorTable::pc_from_gamma_tilde(gt, 0.5, 2.0 / 3.0);
    RngStream rng(123);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      double x = -10.0 + 20.0 * rng.uniform();
      double phi = 1.0 / (1.0 + std::exp(-x));
      worst = std::max(worst,
                       std::abs(t.log_density(phi) - t.log_density_direct(phi)));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("phi pc prior: boundary handling and uniform kind") {
  Eigen::VectorXd gt3 = gamma_tilde(scale_structured(path_graph(3)));
  PhiPriorTable t = PhiPriorTable::pc_from_gamma_tilde(gt3, 0.5, 2.0 / 3.0);
  CHECK(std::isfinite(t.log_density(0.0)));
  CHECK(std::isfinite(t.log_density(1.0)));
  // outside the grid the direct formula takes over smoothly
  CHECK(t.log_density(1e-7) ==
        doctest::Approx(t.log_density_direct(1e-7)).epsilon(1e-12));

  PhiPriorTable u = PhiPriorTable::uniform();
  CHECK(u.log_density(0.3) == 0.0);
  CHECK(u.log_density(0.99) == 0.0);
  CHECK(uniform_phi_log_density(0.42) == 0.0);
  // pointwise densities differ between alpha choices (lambda differs)
  PhiPriorTable ta = PhiPriorTable::pc_from_gamma_tilde(gt3, 0.5, 0.5);
  CHECK(t.log_density(0.3) != ta.log_density(0.3));
}

TEST_CASE("phi distance is monotone increasing on random graphs") {
  RngStream rng(24601);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 4 + static_cast<int>(rng.uniform() * 20);
    Graph g;
    g.n = n;
    g.neighbours.assign(n, {});
    for (int i = 1; i < n; ++i) {
      int j = static_cast<int>(rng.uniform() * i);
      g.neighbours[i].push_back(j);
      g.neighbours[j].push_back(i);
    }
    for (auto& nb : g.neighbours) std::sort(nb.begin(), nb.end());
    Eigen::VectorXd gt = gamma_tilde(scale_structured(g));
    double prev = -1.0;
    for (int k = 0; k < 1000; ++k) {
      double x = -10.0 + 20.0 * k / 999.0;
      double phi = 1.0 / (1.0 + std::exp(-x));
      double d = phi_distance(phi, gt);
      CHECK(d > prev);
      prev = d;
    }
  }
}

TEST_CASE("gauss-hermite 61-point rule matches frozen values") {
  const GaussHermite& gh = gauss_hermite_61();
  REQUIRE(gh.x.size() == 61);
  CHECK(gh.x(0) == doctest::Approx(ref::gh61_x0).epsilon(1e-10));
  CHECK(gh.x(60) == doctest::Approx(-ref::gh61_x0).epsilon(1e-10));
  CHECK(std::abs(gh.x(30)) < 1e-12);
  CHECK(gh.w(30) == doctest::Approx(ref::gh61_w30).epsilon(1e-9));
  CHECK(gh.w.sum() == doctest::Approx(ref::gh61_sum_w).epsilon(1e-12));
  CHECK(gh.w(0) == doctest::Approx(ref::gh61_w0).epsilon(1e-12));
  CHECK(gh.w(1) == doctest::Approx(ref::gh61_w1).epsilon(1e-12));
  CHECK(gh.w(60) == gh.w(0));
  CHECK(gh.x(60) == -gh.x(0));
  // integrates x^2 exp(-x^2) to sqrt(pi)/2
  double m2 = (gh.w.array() * gh.x.array().square()).sum();
  CHECK(m2 == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-10));
}
