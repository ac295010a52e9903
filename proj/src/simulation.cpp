#include "bym2/simulation.hpp"

#include <cmath>
#include <cstdio>

#include "bym2/constraints.hpp"
#include "bym2/errors.hpp"

namespace bym2 {

std::string to_string(RiskKind kind) {
  switch (kind) {
    case RiskKind::constant: return "constant";
    case RiskKind::iid: return "iid";
    case RiskKind::structured: return "structured";
  }
  throw error("unhandled risk kind");
}

RiskKind risk_kind_from_string(const std::string& name) {
  if (name == "constant") return RiskKind::constant;
  if (name == "iid") return RiskKind::iid;
  if (name == "structured") return RiskKind::structured;
  throw error("unknown risk kind: " + name);
}

std::string Scenario::name() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-E%g", to_string(risk_kind).c_str(),
                e_level);
  return buf;
}

void Scenario::validate() const {
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw error("scenario: sigma must be finite and nonnegative");
  if (risk_kind == RiskKind::constant && sigma != 0.0)
    throw error("scenario: constant risk requires sigma = 0");
  if (!std::isfinite(e_level) || e_level <= 0.0)
    throw error("scenario: expected count level must be positive");
  if (!std::isfinite(mu)) throw error("scenario: mu must be finite");
}

Graph lattice_graph(int rows, int cols) {
  if (rows < 1 || cols < 1)
    throw error("lattice_graph: dimensions must be positive");
  Graph g;
  g.n = rows * cols;
  g.neighbours.resize(static_cast<size_t>(g.n));
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& nb = g.neighbours[static_cast<size_t>(id(r, c))];
      if (r > 0) nb.push_back(id(r - 1, c));
      if (c > 0) nb.push_back(id(r, c - 1));
      if (c + 1 < cols) nb.push_back(id(r, c + 1));
      if (r + 1 < rows) nb.push_back(id(r + 1, c));
    }
  }
  return g;
}

Eigen::VectorXd sample_log_risk(const Scenario& sc, const ScaledStructure& s,
                                RngStream& rng) {
  sc.validate();
  if (s.n < 1) throw error("sample_log_risk: empty structure");
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(s.n, sc.mu);
  switch (sc.risk_kind) {
    case RiskKind::constant:
      break;
    case RiskKind::iid:
      for (int i = 0; i < s.n; ++i) eta(i) += sc.sigma * rng.normal();
      break;
    case RiskKind::structured: {
      if (s.n_structured() == 0) break;  // all singletons: no structured part
      double jitter = 1e-6 * s.q_star.mean_diagonal();
      Eigen::VectorXd u =
          sample_constrained_gmrf(s.q_star, s.constraints, jitter, rng);
      for (int i = 0; i < s.n; ++i) {
        int bi = s.structured_index[static_cast<size_t>(i)];
        if (bi >= 0) eta(i) += sc.sigma * u(bi);
      }
      break;
    }
  }
  return eta;
}

Dataset simulate_dataset(const Scenario& sc, const ScaledStructure& s,
                         RngStream& rng) {
  Eigen::VectorXd eta = sample_log_risk(sc, s, rng);
  Dataset d;
  d.e = Eigen::VectorXd::Constant(s.n, sc.e_level);
  d.y.resize(s.n);
  for (int i = 0; i < s.n; ++i) {
    d.y(i) = static_cast<double>(rng.poisson(sc.e_level * std::exp(eta(i))));
  }
  return d;
}

}  // namespace bym2
