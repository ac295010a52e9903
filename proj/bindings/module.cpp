#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "bym2/errors.hpp"
#include "bym2/grid.hpp"
#include "bym2/io.hpp"
#include "bym2/models.hpp"
#include "bym2/simulation.hpp"

namespace py = pybind11;

namespace {

bym2::PrecPrior make_prec_prior(const std::string& kind, double u,
                                double alpha, double shape, double rate,
                                const char* what) {
  if (kind == "pc") return bym2::PrecPrior::pc(u, alpha);
  if (kind == "gamma") return bym2::PrecPrior::gamma(shape, rate);
  throw bym2::error(std::string(what) + ": unknown prior kind '" + kind + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scaled spatial smoothing models for areal count data";
  m.attr("__version__") = "0.1.0";

  auto base = py::register_exception<bym2::error>(m, "Error");
  py::register_exception<bym2::parse_error>(m, "ParseError", base.ptr());
  py::register_exception<bym2::numeric_error>(m, "NumericError", base.ptr());

  m.def(
      "lattice_graph",
      [](int rows, int cols) {
        return bym2::serialize_graph(bym2::lattice_graph(rows, cols));
      },
      py::arg("rows"), py::arg("cols"),
      "Rook-adjacency lattice as graph text.");

  m.def(
      "scale",
      [](const std::string& graph) {
        bym2::ScaledStructure s =
            bym2::scale_structured(bym2::parse_graph(graph));
        py::dict d;
        d["n_regions"] = s.n;
        d["n_structured"] = s.n_structured();
        d["n_components"] = s.n_components;
        d["rank_deficiency"] = s.rank_deficiency;
        d["scale_factors"] = s.scale_factors;
        d["structured_regions"] = s.structured_regions;
        d["singleton_regions"] = s.singleton_regions;
        d["q_star"] = s.q_star.dense();
        d["matrix_coo"] = bym2::write_coo(s.q_star);
        d["meta_json"] = bym2::scale_meta_json(s);
        return d;
      },
      py::arg("graph"),
      "Scale a graph's structured precision to unit geometric mean "
      "variance. Returns the scaled block (dense), its coordinate-format "
      "text, and the metadata.");

  m.def(
      "phi_prior_table",
      [](const std::string& graph, double u, double alpha, int points) {
        if (!(u > 0.0 && u < 1.0)) throw bym2::error("u must be in (0, 1)");
        if (!(alpha > 0.0 && alpha < 1.0))
          throw bym2::error("alpha must be in (0, 1)");
        if (points < 2) throw bym2::error("points must be at least 2");
        bym2::ScaledStructure s =
            bym2::scale_structured(bym2::parse_graph(graph));
        bym2::PhiPriorTable t = bym2::PhiPriorTable::pc(s, u, alpha);
        const double step = 1.0 / (points + 1);
        Eigen::VectorXd phi(points), ld(points);
        for (int k = 1; k <= points; ++k) {
          phi(k - 1) = k * step;
          ld(k - 1) = t.log_density(phi(k - 1));
        }
        py::dict d;
        d["phi"] = phi;
        d["log_density"] = ld;
        d["lambda"] = t.lambda();
        d["mass_below_first"] = t.cdf(step);
        d["mass_above_last"] = t.tail_mass(points * step);
        return d;
      },
      py::arg("graph"), py::arg("u") = 0.5, py::arg("alpha") = 2.0 / 3.0,
      py::arg("points") = 999,
      "Tabulate the mixing-parameter prior density on an open grid "
      "k/(points+1); the closed-form masses outside the grid come along.");

  m.def(
      "fit_json",
      [](const std::string& graph, const Eigen::VectorXd& y,
         const Eigen::VectorXd& e, std::optional<Eigen::MatrixXd> z,
         const std::string& model, const std::string& tau_prior, double tau_u,
         double tau_alpha, double tau_shape, double tau_rate,
         const std::string& tau2_prior, double tau2_u, double tau2_alpha,
         double tau2_shape, double tau2_rate, const std::string& phi_prior,
         double phi_u, double phi_alpha, bool scaled_dean, double dz,
         double diff_logdens, int max_points, double fe_variance,
         int threads) {
        bym2::Graph g = bym2::parse_graph(graph);
        bym2::Dataset data;
        data.y = y;
        data.e = e;
        if (z) data.z = *z;
        data.validate();
        if (data.n() != g.n)
          throw bym2::error("data has " + std::to_string(data.n()) +
                            " rows but the graph has " + std::to_string(g.n) +
                            " regions");
        bym2::PriorConfig p;
        p.tau = make_prec_prior(tau_prior, tau_u, tau_alpha, tau_shape,
                                tau_rate, "tau");
        p.tau_u = make_prec_prior(tau2_prior, tau2_u, tau2_alpha, tau2_shape,
                                  tau2_rate, "tau2");
        if (phi_prior == "pc") {
          p.phi = bym2::PriorConfig::Phi::pc;
        } else if (phi_prior == "uniform") {
          p.phi = bym2::PriorConfig::Phi::uniform;
        } else if (phi_prior != "default") {
          throw bym2::error("unknown phi prior '" + phi_prior + "'");
        }
        if (!(phi_u > 0.0 && phi_u < 1.0))
          throw bym2::error("phi_u must be in (0, 1)");
        if (!(phi_alpha > 0.0 && phi_alpha < 1.0))
          throw bym2::error("phi_alpha must be in (0, 1)");
        p.phi_u = phi_u;
        p.phi_alpha = phi_alpha;
        p.scaled_dean = scaled_dean;

        bym2::GridConfig cfg;
        cfg.dz = dz;
        cfg.diff_logdens = diff_logdens;
        cfg.max_points = max_points;
        cfg.fe_prior_variance = fe_variance;
        cfg.threads = threads;
        bym2::ModelKind kind = bym2::model_kind_from_string(model);

        std::string out;
        {
          py::gil_scoped_release release;
          bym2::LatentModel lm = bym2::build_latent_model(kind, g, p);
          bym2::FitResult fr = bym2::fit(lm, data, cfg);
          out = bym2::fit_result_json(fr);
        }
        return out;
      },
      py::arg("graph"), py::arg("y"), py::arg("e"),
      py::arg("z") = std::nullopt, py::arg("model") = "bym2",
      py::arg("tau_prior") = "pc", py::arg("tau_u") = 0.2 / 0.31,
      py::arg("tau_alpha") = 0.1, py::arg("tau_shape") = 1.0,
      py::arg("tau_rate") = 5e-5, py::arg("tau2_prior") = "pc",
      py::arg("tau2_u") = 0.2 / 0.31, py::arg("tau2_alpha") = 0.1,
      py::arg("tau2_shape") = 1.0, py::arg("tau2_rate") = 5e-5,
      py::arg("phi_prior") = "default", py::arg("phi_u") = 0.5,
      py::arg("phi_alpha") = 2.0 / 3.0, py::arg("scaled_dean") = false,
      py::arg("dz") = 0.2, py::arg("diff_logdens") = 20.0,
      py::arg("max_points") = 4000, py::arg("fe_variance") = 100.0,
      py::arg("threads") = 0,
      "Fit a model and return the full result as a JSON string; "
      "bym2.fit wraps this and parses it.");

  m.def(
      "simulate",
      [](const std::string& graph, const std::string& risk, double sigma,
         double e_level, double mu, std::uint64_t seed) {
        bym2::Graph g = bym2::parse_graph(graph);
        bym2::Scenario sc;
        sc.risk_kind = bym2::risk_kind_from_string(risk);
        sc.sigma = sigma;
        sc.e_level = e_level;
        sc.mu = mu;
        sc.validate();
        bym2::ScaledStructure s = bym2::scale_structured(g);
        bym2::RngStream rng = bym2::RngStream::substream(seed, 0, 0);
        bym2::Dataset d = bym2::simulate_dataset(sc, s, rng);
        return py::make_tuple(d.y, d.e);
      },
      py::arg("graph"), py::arg("risk") = "constant", py::arg("sigma") = 0.0,
      py::arg("e_level") = 60.0, py::arg("mu") = 0.0, py::arg("seed") = 1,
      "Draw one count dataset from a risk scenario; returns (y, e).");
}
