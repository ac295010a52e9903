#include <algorithm>
#include <chrono>
#include <cmath>

#include "bym2/graph.hpp"
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

Graph random_connected(int n, RngStream& rng) {
  Graph g;
  g.n = n;
  g.neighbours.assign(n, {});
  auto link = [&](int i, int j) {
    g.neighbours[i].push_back(j);
    g.neighbours[j].push_back(i);
  };
  // random spanning tree, then extra edges
  for (int i = 1; i < n; ++i)
    link(i, static_cast<int>(rng.uniform() * i));
  int extras = static_cast<int>(rng.uniform() * n);
  for (int k = 0; k < extras; ++k) {
    int i = static_cast<int>(rng.uniform() * n);
    int j = static_cast<int>(rng.uniform() * n);
    if (i == j) continue;
    auto& ni = g.neighbours[i];
    if (std::find(ni.begin(), ni.end(), j) == ni.end()) link(i, j);
  }
  for (auto& nb : g.neighbours) std::sort(nb.begin(), nb.end());
  return g;
}

double geometric_mean_variance(const ScaledStructure& s) {
  double jitter = 1e-6 * s.q_star.mean_diagonal();
  Eigen::VectorXd v =
      constrained_marginal_variances(s.q_star, s.constraints, jitter);
  return std::exp(v.array().log().mean());
}

}  // namespace

TEST_CASE("generalized_variance: P2 and P3") {
  SymSparse q2 = besag_precision(path_graph(2));
  auto gv2 = generalized_variance(q2, ConstraintSet::sum_to_zero(2));
  REQUIRE(gv2.size() == 1);
  CHECK(gv2[0] == doctest::Approx(ref::p2_sigma2_gv).epsilon(1e-6));

  SymSparse q3 = besag_precision(path_graph(3));
  auto gv3 = generalized_variance(q3, ConstraintSet::sum_to_zero(3));
  REQUIRE(gv3.size() == 1);
  CHECK(std::abs(gv3[0] - ref::p3_sigma2_gv) < 1e-4);
}

TEST_CASE("scale_structured: P2 exact block") {
  ScaledStructure s = scale_structured(path_graph(2));
  CHECK(s.rank_deficiency == 1);
  CHECK(s.singleton_regions.empty());
  REQUIRE(s.scale_factors.size() == 1);
  CHECK(s.scale_factors[0] == doctest::Approx(0.25).epsilon(1e-6));
  Eigen::MatrixXd d = s.q_star.dense();
  CHECK(d(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(d(1, 0) == doctest::Approx(-0.25).epsilon(1e-6));

  Eigen::VectorXd v = constrained_marginal_variances(
      s.q_star, s.constraints, 1e-6 * s.q_star.mean_diagonal());
  CHECK(v(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(v(1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("scale_structured: P3 scaled variances and unit geometric mean") {
  ScaledStructure s = scale_structured(path_graph(3));
  Eigen::VectorXd v = constrained_marginal_variances(
      s.q_star, s.constraints, 1e-6 * s.q_star.mean_diagonal());
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(v(i) - ref::p3_scaled_variances[i]) < 1e-3);
  CHECK(geometric_mean_variance(s) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scale_structured: disjoint components are scaled blockwise") {
  Graph g = parse_graph("4\n0 1 1\n1 1 0\n2 1 3\n3 1 2\n");
  ScaledStructure s = scale_structured(g);
  CHECK(s.rank_deficiency == 2);
  REQUIRE(s.scale_factors.size() == 2);
  CHECK(s.scale_factors[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(s.scale_factors[1] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(s.constraints.count() == 2);
  CHECK(geometric_mean_variance(s) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scale_structured: singletons are excluded and listed") {
  Graph g = parse_graph("4\n0 1 1\n1 2 0 2\n2 1 1\n3 0\n");
  ScaledStructure s = scale_structured(g);
  CHECK(s.n == 4);
  CHECK(s.n_structured() == 3);
  CHECK(s.singleton_regions == std::vector<int>{3});
  CHECK(s.structured_index[3] == -1);
  CHECK(s.rank_deficiency == 1);
  CHECK(s.n_components == 2);

  Graph lone = parse_graph("1\n0 0\n");
  ScaledStructure s1 = scale_structured(lone);
  CHECK(s1.n_structured() == 0);
  CHECK(s1.singleton_regions == std::vector<int>{0});
  CHECK(s1.rank_deficiency == 0);
}

TEST_CASE("scale_structured: known lattice scale factors") {
  ScaledStructure s6 = scale_structured(lattice_rook(6, 6));
  CHECK(std::abs(s6.scale_factors[0] - ref::lattice6_sigma2_gv) < 1e-6);
  ScaledStructure s10 = scale_structured(lattice_rook(10, 10));
  CHECK(std::abs(s10.scale_factors[0] - ref::lattice10_sigma2_gv) < 1e-6);
}

TEST_CASE("scaling: 200 random connected graphs have unit geometric mean") {
  auto t0 = std::chrono::steady_clock::now();
  RngStream rng(314159);
  for (int rep = 0; rep < 200; ++rep) {
    int n = 5 + static_cast<int>(rng.uniform() * 36);
    Graph g = random_connected(n, rng);
    ScaledStructure s = scale_structured(g);
    CHECK(geometric_mean_variance(s) == doctest::Approx(1.0).epsilon(1e-6));
    // scaling is idempotent in effect
    auto gv = generalized_variance(s.q_star, s.constraints);
    CHECK(gv[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
  CHECK(secs < 30.0);
}

TEST_CASE("scaling: permutation equivariance") {
  RngStream rng(161803);
  Graph g = random_connected(12, rng);
  ScaledStructure s = scale_structured(g);

  // relabel regions by reversal
  Graph rev;
  rev.n = g.n;
  rev.neighbours.assign(g.n, {});
  auto p = [&](int i) { return g.n - 1 - i; };
  for (int i = 0; i < g.n; ++i)
    for (int j : g.neighbours[i]) rev.neighbours[p(i)].push_back(p(j));
  for (auto& nb : rev.neighbours) std::sort(nb.begin(), nb.end());

  ScaledStructure sr = scale_structured(rev);
  CHECK(sr.scale_factors[0] ==
        doctest::Approx(s.scale_factors[0]).epsilon(1e-10));

  Eigen::VectorXd v = constrained_marginal_variances(
      s.q_star, s.constraints, 1e-6 * s.q_star.mean_diagonal());
  Eigen::VectorXd vr = constrained_marginal_variances(
      sr.q_star, sr.constraints, 1e-6 * sr.q_star.mean_diagonal());
  for (int i = 0; i < g.n; ++i) {
    int bi = s.structured_index[i];
    int bri = sr.structured_index[p(i)];
    CHECK(v(bi) == doctest::Approx(vr(bri)).epsilon(1e-8));
  }
}
