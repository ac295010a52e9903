#include <Eigen/Dense>
#include <cmath>

#include "bym2/cholesky.hpp"
#include "bym2/constraints.hpp"
#include "bym2/errors.hpp"
#include "bym2/graph.hpp"
#include "bym2/rng.hpp"
#include "bym2/sparse.hpp"
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
  for (auto& nb : g.neighbours) std::sort(nb.begin(), nb.end());
  return g;
}

// Random sparse SPD matrix: banded + diagonal dominance.
SymSparse random_spd(int n, RngStream& rng) {
  Triplets t;
  for (int i = 0; i < n; ++i) {
    double d = 2.0 + 3.0 * rng.uniform();
    for (int j = std::max(0, i - 3); j < i; ++j) {
      if (rng.uniform() < 0.4) {
        double v = rng.uniform() - 0.5;
        t.emplace_back(i, j, v);
        d += std::abs(v);
      }
    }
    t.emplace_back(i, i, d);
  }
  return SymSparse::from_triplets(n, t);
}

}  // namespace

TEST_CASE("factorize: identity and diagonal log determinants") {
  SymSparse eye = SymSparse::from_dense(Eigen::MatrixXd::Identity(3, 3));
  Cholesky f;
  f.factorize(eye, 0.0);
  CHECK(f.log_det() == doctest::Approx(0.0).epsilon(1e-14));

  Eigen::MatrixXd d(2, 2);
  d << 2, 0, 0, 3;
  Cholesky fd;
  fd.factorize(SymSparse::from_dense(d), 0.0);
  CHECK(fd.log_det() == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("factorize: singular Besag structure needs jitter") {
  SymSparse q = besag_precision(path_graph(3));
  Cholesky f;
  CHECK_THROWS_AS(f.factorize(q, 0.0), not_positive_definite);
  CHECK_NOTHROW(f.factorize(q, 1e-6));
}

TEST_CASE("solve: small exact systems") {
  SymSparse eye = SymSparse::from_dense(Eigen::MatrixXd::Identity(3, 3));
  Cholesky f;
  f.factorize(eye, 0.0);
  Eigen::VectorXd b(3);
  b << 1, 2, 3;
  CHECK((f.solve(b) - b).lpNorm<Eigen::Infinity>() < 1e-14);

  Eigen::MatrixXd d(2, 2);
  d << 2, 0, 0, 4;
  Cholesky fd;
  fd.factorize(SymSparse::from_dense(d), 0.0);
  Eigen::VectorXd b2(2);
  b2 << 2, 4;
  Eigen::VectorXd x = fd.solve(b2);
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(1.0));

  // (P3 Q + I) x = e_0 against a dense solve.
  SymSparse q = besag_precision(path_graph(3));
  Eigen::MatrixXd qd = q.dense() + Eigen::MatrixXd::Identity(3, 3);
  Cholesky fq;
  fq.factorize(SymSparse::from_dense(qd), 0.0);
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(3);
  e0(0) = 1.0;
  Eigen::VectorXd xs = fq.solve(e0);
  Eigen::VectorXd xd = qd.fullPivLu().solve(e0);
  CHECK((xs - xd).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("factorize/solve/log_det match dense oracle on random SPD") {
  RngStream rng(20240811);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 5 + static_cast<int>(rng.uniform() * 45);
    SymSparse q = random_spd(n, rng);
    Eigen::MatrixXd qd = q.dense();

    Cholesky f;
    f.factorize(q, 0.0);

    // log det
    Eigen::LLT<Eigen::MatrixXd> llt(qd);
    REQUIRE(llt.info() == Eigen::Success);
    double ld_dense = 0.0;
    for (int i = 0; i < n; ++i) ld_dense += 2.0 * std::log(llt.matrixL()(i, i));
    CHECK(f.log_det() == doctest::Approx(ld_dense).epsilon(1e-9));

    // solve
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = rng.normal();
    CHECK((f.solve(b) - qd.fullPivLu().solve(b)).lpNorm<Eigen::Infinity>() <
          1e-9);

    // reconstruction through the factor: residual of M * solve(e_i) = e_i
    Eigen::MatrixXd sol =
        f.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)));
    CHECK((qd * sol - Eigen::MatrixXd::Identity(n, n)).norm() /
              std::sqrt(static_cast<double>(n)) <
          1e-10);
  }
}

TEST_CASE("selected inverse matches dense inverse on its pattern") {
  RngStream rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    int n = 8 + static_cast<int>(rng.uniform() * 30);
    SymSparse q = random_spd(n, rng);
    Eigen::MatrixXd inv = q.dense().inverse();

    Cholesky f;
    f.factorize(q, 0.0);
    SelectedInverse z = f.selected_inverse();

    Eigen::VectorXd d = z.diag();
    for (int i = 0; i < n; ++i)
      CHECK(d(i) == doctest::Approx(inv(i, i)).epsilon(1e-9));

    // Cross terms on the original sparsity pattern (subset of fill).
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(q.lower, j); it; ++it)
        CHECK(z(static_cast<int>(it.row()), j) ==
              doctest::Approx(inv(it.row(), j)).epsilon(1e-9));
  }
}

TEST_CASE("dense_pseudo_inverse: P2, P3, identity") {
  SymSparse q2 = besag_precision(path_graph(2));
  Eigen::MatrixXd p2 = dense_pseudo_inverse(q2.dense(), 1);
  CHECK(p2(0, 0) == doctest::Approx(ref::p2_pinv_diag[0]).epsilon(1e-12));
  CHECK(p2(0, 1) == doctest::Approx(-0.25).epsilon(1e-12));

  SymSparse q3 = besag_precision(path_graph(3));
  Eigen::MatrixXd p3 = dense_pseudo_inverse(q3.dense(), 1);
  for (int i = 0; i < 3; ++i)
    CHECK(p3(i, i) == doctest::Approx(ref::p3_pinv_diag[i]).epsilon(1e-10));

  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  CHECK((dense_pseudo_inverse(eye, 0) - eye).norm() < 1e-12);

  // idempotence: pinv * m * pinv = pinv
  CHECK((p3 * q3.dense() * p3 - p3).norm() < 1e-8);
}

TEST_CASE("eigenvalues_sym examples") {
  SymSparse q3 = besag_precision(path_graph(3));
  Eigen::VectorXd ev = eigenvalues_sym(q3.dense());
  CHECK(ev(0) == doctest::Approx(ref::p3_eigenvalues[0]).epsilon(1e-12));
  CHECK(ev(1) == doctest::Approx(ref::p3_eigenvalues[1]).epsilon(1e-12));
  CHECK(ev(2) == doctest::Approx(ref::p3_eigenvalues[2]).epsilon(1e-12));

  Eigen::VectorXd e4 = eigenvalues_sym(Eigen::MatrixXd::Identity(4, 4));
  for (int i = 0; i < 4; ++i) CHECK(e4(i) == doctest::Approx(1.0));

  Eigen::MatrixXd d(2, 2);
  d << 5, 0, 0, 2;
  Eigen::VectorXd ed = eigenvalues_sym(d);
  CHECK(ed(0) == doctest::Approx(2.0));
  CHECK(ed(1) == doctest::Approx(5.0));
}

TEST_CASE("constrained marginal variances: P-graph examples") {
  SymSparse q2 = besag_precision(path_graph(2));
  Eigen::VectorXd v2 = constrained_marginal_variances(
      q2, ConstraintSet::sum_to_zero(2), 1e-6 * q2.mean_diagonal());
  CHECK(v2(0) == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(v2(1) == doctest::Approx(0.25).epsilon(1e-5));

  SymSparse q3 = besag_precision(path_graph(3));
  Eigen::VectorXd v3 = constrained_marginal_variances(
      q3, ConstraintSet::sum_to_zero(3), 1e-6 * q3.mean_diagonal());
  for (int i = 0; i < 3; ++i)
    CHECK(v3(i) == doctest::Approx(ref::p3_pinv_diag[i]).epsilon(1e-3));

  // identity with no constraints -> unit variances
  SymSparse eye = SymSparse::from_dense(Eigen::MatrixXd::Identity(5, 5));
  Eigen::VectorXd ve =
      constrained_marginal_variances(eye, ConstraintSet::none(5), 0.0);
  for (int i = 0; i < 5; ++i) CHECK(ve(i) == doctest::Approx(1.0));
}

TEST_CASE("constrained marginal variances: selected equals dense") {
  RngStream rng(5150);
  for (int rep = 0; rep < 6; ++rep) {
    int n = 20 + static_cast<int>(rng.uniform() * 20);
    SymSparse q = random_spd(n, rng);
    ConstraintSet c = ConstraintSet::sum_to_zero(n);
    Eigen::VectorXd vd =
        constrained_marginal_variances(q, c, 0.0, VarianceMethod::dense);
    Eigen::VectorXd vs =
        constrained_marginal_variances(q, c, 0.0, VarianceMethod::selected);
    CHECK((vd - vs).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("constrained marginal variances: jitter insensitivity") {
  for (int n : {2, 3}) {
    SymSparse q = besag_precision(path_graph(n));
    ConstraintSet c = ConstraintSet::sum_to_zero(n);
    Eigen::VectorXd a = constrained_marginal_variances(q, c, 1e-6);
    Eigen::VectorXd b = constrained_marginal_variances(q, c, 1e-8);
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(a(i) - b(i)) / b(i) < 1e-4);
  }
}

TEST_CASE("sample_constrained_gmrf: constraint satisfaction and determinism") {
  SymSparse q = besag_precision(path_graph(3));
  ConstraintSet c = ConstraintSet::sum_to_zero(3);
  RngStream r1(99), r2(99);
  Eigen::VectorXd x1 = sample_constrained_gmrf(q, c, 1e-6, r1);
  Eigen::VectorXd x2 = sample_constrained_gmrf(q, c, 1e-6, r2);
  CHECK(std::abs(x1.sum()) < 1e-10);
  CHECK((x1 - x2).lpNorm<Eigen::Infinity>() == 0.0);  // bit identical
}

TEST_CASE("sample_constrained_gmrf: Monte Carlo variances match oracle") {
  // P3 scaled structure: builds Q_star = sigma2_gv * Q by hand here to stay
  // independent of the scaling module.
  SymSparse q3 = besag_precision(path_graph(3));
  SymSparse q_star = q3.scaled(ref::p3_sigma2_gv);
  ConstraintSet c = ConstraintSet::sum_to_zero(3);
  double jitter = 1e-6 * q_star.mean_diagonal();

  Eigen::VectorXd target =
      constrained_marginal_variances(q_star, c, jitter);
  const int draws = 20000;
  RngStream rng(31337);
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(3);
  for (int k = 0; k < draws; ++k) {
    Eigen::VectorXd x = sample_constrained_gmrf(q_star, c, jitter, rng);
    accum += x.cwiseProduct(x);
  }
  for (int i = 0; i < 3; ++i) {
    double mc = accum(i) / draws;
    CHECK(std::abs(mc - target(i)) / target(i) < 0.05);
  }
}

TEST_CASE("constrained_log_det matches dense null-space projection") {
  RngStream rng(4242);
  for (int rep = 0; rep < 8; ++rep) {
    int n = 6 + static_cast<int>(rng.uniform() * 10);
    SymSparse q = random_spd(n, rng);
    ConstraintSet c = ConstraintSet::sum_to_zero(n);

    Cholesky f;
    f.factorize(q, 0.0);
    double got = constrained_log_det(f, c);

    // dense: orthonormal basis V of null(A), log det(V' M V)
    Eigen::FullPivLU<Eigen::MatrixXd> lu(c.a);
    Eigen::MatrixXd v = lu.kernel();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
    Eigen::MatrixXd vq = qr.householderQ() *
                         Eigen::MatrixXd::Identity(n, n - c.count());
    Eigen::MatrixXd m = vq.transpose() * q.dense() * vq;
    double want = std::log(m.determinant());
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}
