#include <cmath>

#include "bym2/errors.hpp"
#include "bym2/graph.hpp"
#include "bym2/cholesky.hpp"
#include "bym2/rng.hpp"
#include "doctest.h"

using namespace bym2;

TEST_CASE("parse_graph: 0-based P3") {
  Graph g = parse_graph("3\n0 1 1\n1 2 0 2\n2 1 1\n");
  CHECK(g.n == 3);
  REQUIRE(g.neighbours[1].size() == 2);
  CHECK(g.neighbours[1][0] == 0);
  CHECK(g.neighbours[1][1] == 2);
  CHECK(g.symmetrized_pairs == 0);
}

TEST_CASE("parse_graph: 1-based with same structure") {
  Graph g = parse_graph("3\n1 1 2\n2 2 1 3\n3 1 2\n");
  CHECK(g.n == 3);
  CHECK(g.neighbours[0] == std::vector<int>{1});
  CHECK(g.neighbours[2] == std::vector<int>{1});
}

TEST_CASE("parse_graph: ambiguous index base is rejected") {
  // n=3 but indices 2..4: no zero, max exceeds n.
  CHECK_THROWS_AS(parse_graph("3\n2 1 3\n3 2 2 4\n4 1 3\n"), parse_error);
}

TEST_CASE("parse_graph: malformed files carry line numbers") {
  try {
    parse_graph("3\n0 1 1\n1 2 0\n2 1 1\n");  // line 3 declares 2, lists 1
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  try {
    parse_graph("2\n0 1 x\n1 1 0\n");
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("parse_graph: self loops and duplicate neighbours are rejected") {
  CHECK_THROWS_AS(parse_graph("2\n0 2 1 1\n1 1 0\n"), parse_error);
  CHECK_THROWS_AS(parse_graph("2\n0 1 0\n1 1 0\n"), parse_error);
  CHECK_THROWS_AS(parse_graph("2\n0 1 1\n0 1 1\n"), parse_error);  // dup line
  CHECK_THROWS_AS(parse_graph("2\n0 1 5\n1 1 0\n"), parse_error);  // range
}

TEST_CASE("parse_graph: one-sided adjacency is repaired and counted") {
  Graph g = parse_graph("3\n0 1 1\n1 0\n2 1 1\n");
  CHECK(g.symmetrized_pairs == 2);
  CHECK(g.neighbours[1] == std::vector<int>{0, 2});
}

TEST_CASE("parse_graph: blank lines are skipped, missing lines rejected") {
  Graph g = parse_graph("2\n\n0 1 1\n\n1 1 0\n");
  CHECK(g.n == 2);
  CHECK_THROWS_AS(parse_graph("3\n0 1 1\n1 1 0\n"), parse_error);
}

TEST_CASE("connected_components: paths, disjoint edges, isolated nodes") {
  int nc = 0;
  Graph p3 = parse_graph("3\n0 1 1\n1 2 0 2\n2 1 1\n");
  auto l1 = connected_components(p3, &nc);
  CHECK(nc == 1);
  CHECK(l1 == std::vector<int>{0, 0, 0});

  Graph two_edges = parse_graph("4\n0 1 1\n1 1 0\n2 1 3\n3 1 2\n");
  auto l2 = connected_components(two_edges, &nc);
  CHECK(nc == 2);
  CHECK(l2 == std::vector<int>{0, 0, 1, 1});

  Graph with_island = parse_graph("4\n0 1 1\n1 2 0 2\n2 1 1\n3 0\n");
  auto l3 = connected_components(with_island, &nc);
  CHECK(nc == 2);
  CHECK(l3 == std::vector<int>{0, 0, 0, 1});
}

TEST_CASE("besag_precision: entries and row sums") {
  Graph p3 = parse_graph("3\n0 1 1\n1 2 0 2\n2 1 1\n");
  Eigen::MatrixXd q = besag_precision(p3).dense();
  Eigen::MatrixXd want(3, 3);
  want << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((q - want).norm() == 0.0);
  CHECK(q.rowwise().sum().lpNorm<Eigen::Infinity>() == 0.0);

  Graph p2 = parse_graph("2\n0 1 1\n1 1 0\n");
  Eigen::MatrixXd q2 = besag_precision(p2).dense();
  CHECK(q2(0, 0) == 1.0);
  CHECK(q2(0, 1) == -1.0);
}

TEST_CASE("round trip: parse -> serialize -> parse is identity") {
  std::vector<std::string> files = {
      "3\n0 1 1\n1 2 0 2\n2 1 1\n",
      "3\n1 1 2\n2 2 1 3\n3 1 2\n",            // 1-based input
      "4\n0 1 1\n1 2 0 2\n2 1 1\n3 0\n",       // island
      "5\n0 2 1 2\n1 2 0 2\n2 3 0 1 3\n3 2 2 4\n4 1 3\n",
  };
  for (const auto& text : files) {
    Graph g1 = parse_graph(text);
    std::string s1 = serialize_graph(g1);
    Graph g2 = parse_graph(s1);
    CHECK(g1.n == g2.n);
    CHECK(g1.neighbours == g2.neighbours);
    CHECK(serialize_graph(g2) == s1);
  }
}

TEST_CASE("zero eigenvalue count equals component count on random graphs") {
  RngStream rng(2718);
  for (int rep = 0; rep < 15; ++rep) {
    int n = 5 + static_cast<int>(rng.uniform() * 45);
    Graph g;
    g.n = n;
    g.neighbours.assign(n, {});
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < 2.5 / n) {
          g.neighbours[i].push_back(j);
          g.neighbours[j].push_back(i);
        }
    for (auto& nb : g.neighbours) std::sort(nb.begin(), nb.end());

    int nc = 0;
    connected_components(g, &nc);
    Eigen::VectorXd ev = eigenvalues_sym(besag_precision(g).dense());
    int zeros = 0;
    for (int i = 0; i < n; ++i)
      if (std::abs(ev(i)) < 1e-9) ++zeros;
    CHECK(zeros == nc);
  }
}
