#include <cmath>

#include "json.hpp"

#include "bym2/errors.hpp"
#include "bym2/io.hpp"
#include "bym2/models.hpp"
#include "bym2/simulation.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace bym2;

TEST_CASE("data files with a header load named columns") {
  Dataset d = read_data("y E SMR\n4 2 2.0\n0 1.5 0\n7 7 1\n");
  CHECK(d.n() == 3);
  CHECK(d.y(0) == 4.0);
  CHECK(d.e(1) == 1.5);
  CHECK(d.z.cols() == 0);  // SMR is not a covariate

  Dataset c = read_data("y E x1 x2\n1 2 0.5 -1\n3 4 0.25 2\n");
  CHECK(c.z.cols() == 2);
  CHECK(c.z(0, 0) == 0.5);
  CHECK(c.z(1, 1) == 2.0);

  // names are case-insensitive and order-free
  Dataset r = read_data("E Y\n2 4\n");
  CHECK(r.y(0) == 4.0);
  CHECK(r.e(0) == 2.0);
}

TEST_CASE("headerless data is positional with the three-column exception") {
  Dataset two = read_data("5 1\n6 2\n");
  CHECK(two.n() == 2);
  CHECK(two.z.cols() == 0);

  // y E SMR: the third column is redundant and skipped
  Dataset three = read_data("5 1 5.0\n6 2 3.0\n");
  CHECK(three.z.cols() == 0);
  CHECK(three.y(1) == 6.0);

  Dataset four = read_data("5 1 0.5 1.5\n6 2 0.7 2.5\n");
  CHECK(four.z.cols() == 2);
  CHECK(four.z(1, 0) == 0.7);
}

TEST_CASE("datasets round-trip through the text format") {
  Dataset d;
  d.y = Eigen::Vector3d(0.0, 7.0, 123.0);
  d.e = Eigen::Vector3d(1.5, 1.0 / 3.0, 60.0);
  d.z.resize(3, 2);
  d.z << 0.1, -2.0, 0.25, 1e-9, 3.0, 0.0;
  std::string text = write_data(d);
  CHECK(text.find("y E z1 z2\n") == 0);
  Dataset back = read_data(text);
  CHECK(back.y == d.y);
  CHECK(back.e == d.e);
  CHECK(back.z == d.z);
  CHECK(write_data(back) == text);
}

TEST_CASE("data parse errors carry line numbers") {
  try {
    read_data("y E\n1 1\n2 oops\n");
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line == 3);
  }
  CHECK_THROWS_AS(read_data("y x\n1 2\n"), parse_error);      // no E column
  CHECK_THROWS_AS(read_data("y E\n-1 2\n"), parse_error);     // negative count
  CHECK_THROWS_AS(read_data("y E\n1 0\n"), parse_error);      // E must be > 0
  CHECK_THROWS_AS(read_data("1 2\n3 4 5\n"), parse_error);    // ragged row
  CHECK_THROWS_AS(read_data("y E\n"), parse_error);           // no rows
  CHECK_THROWS_AS(read_data(""), parse_error);
  CHECK_THROWS_AS(read_data("y E y\n1 2 3\n"), parse_error);  // duplicate y
}

TEST_CASE("coordinate files round-trip exactly") {
  Triplets ts;
  ts.emplace_back(0, 0, 2.0);
  ts.emplace_back(1, 0, -1.0 / 3.0);  // needs shortest-exact printing
  ts.emplace_back(1, 1, 2.0);
  ts.emplace_back(2, 2, 1e-17);
  SymSparse q = SymSparse::from_triplets(3, ts);
  std::string text = write_coo(q);
  SymSparse back = read_coo(text, 3);
  CHECK(back.n == 3);
  CHECK((back.dense() - q.dense()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(write_coo(back) == text);

  CHECK(read_coo("", 0).n == 0);
}

TEST_CASE("coordinate parse errors") {
  CHECK_THROWS_AS(read_coo("1 2 0.5\n", 3), parse_error);  // upper triangle
  CHECK_THROWS_AS(read_coo("4 1 0.5\n", 3), parse_error);  // out of range
  CHECK_THROWS_AS(read_coo("1 1 1\n1 1 2\n", 3), parse_error);  // duplicate
  CHECK_THROWS_AS(read_coo("1 1\n", 3), parse_error);
  CHECK_THROWS_AS(read_coo("1.5 1 2\n", 3), parse_error);
  try {
    read_coo("1 1 1\n2 1 x\n", 2);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("scale metadata sidecar describes the structure") {
  // 2x2 block plus two singletons
  Graph g = testutil::make_graph(6, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  ScaledStructure s = scale_structured(g);
  nlohmann::json j = nlohmann::json::parse(scale_meta_json(s));
  CHECK(j["n_regions"] == 6);
  CHECK(j["n_structured"] == 4);
  CHECK(j["rank_deficiency"] == 1);
  CHECK(j["scale_factors"].size() == 1);
  CHECK(j["singleton_regions"] == nlohmann::json({4, 5}));
  CHECK(j["structured_regions"] == nlohmann::json({0, 1, 2, 3}));
  CHECK(j["index_base"] == 0);
}

TEST_CASE("fit result json carries summaries, marginals, and the grid") {
  Graph g = lattice_graph(3, 3);
  LatentModel model = build_latent_model(ModelKind::bym2, g, PriorConfig{});
  Dataset data;
  data.y = Eigen::VectorXd::Constant(9, 30.0);
  data.e = Eigen::VectorXd::Constant(9, 30.0);
  GridConfig cfg;
  cfg.dz = 0.5;
  cfg.diff_logdens = 10.0;
  FitResult fr = fit(model, data, cfg);

  nlohmann::json j = nlohmann::json::parse(fit_result_json(fr));
  CHECK(j["model"] == "bym2");
  CHECK(j["n_regions"] == 9);
  CHECK(j["summaries"]["hyper"].size() == 2);
  CHECK(j["summaries"]["hyper"][0]["name"] == "1/sqrt(tau)");
  CHECK(j["summaries"]["intercept"]["mean"].is_number());
  CHECK(j["eta"]["mean"].size() == 9);
  CHECK(j["risk"]["sd"].size() == 9);
  CHECK(j["diagnostics"]["cpo"].size() == 9);
  CHECK(j["diagnostics"]["dic_focus"].is_string());
  CHECK(j["grid"]["points"].size() == j["grid"]["size"].get<size_t>());
  double wsum = 0.0;
  for (const auto& p : j["grid"]["points"]) wsum += p["weight"].get<double>();
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));

  std::string table = fit_summary_table(fr);
  CHECK(table.find("Mean") != std::string::npos);
  CHECK(table.find("Mode") != std::string::npos);
  CHECK(table.find("\nmu ") != std::string::npos);
  CHECK(table.find("1/sqrt(tau)") != std::string::npos);
  CHECK(table.find("phi") != std::string::npos);

  std::string csv = risk_table_csv(fr, data);
  CHECK(csv.find("region,y,e,smr,") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);

  Dataset other;
  other.y = Eigen::VectorXd::Constant(4, 1.0);
  other.e = Eigen::VectorXd::Constant(4, 1.0);
  CHECK_THROWS_AS(risk_table_csv(fr, other), bym2::error);
}
