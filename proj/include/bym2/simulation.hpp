#pragma once

#include <string>

#include "bym2/dataset.hpp"
#include "bym2/graph.hpp"
#include "bym2/rng.hpp"
#include "bym2/scaling.hpp"

namespace bym2 {

enum class RiskKind { constant, iid, structured };

std::string to_string(RiskKind kind);
RiskKind risk_kind_from_string(const std::string& name);

// One cell of the study design: the shape of the log-risk surface, its
// spread, and a common expected count per region.
struct Scenario {
  RiskKind risk_kind = RiskKind::constant;
  double sigma = 0.0;  // sd of the log risk, 1/sqrt(tau_b); 0 when constant
  double e_level = 60.0;
  double mu = 0.0;
  std::string name() const;  // e.g. "structured-E60"
  void validate() const;
};

// Rook-adjacency rows x cols lattice, the desk-scale stand-in for an
// administrative map.
Graph lattice_graph(int rows, int cols);

// Log risk eta = mu + sigma * b. constant: b = 0. iid: b standard normal.
// structured: b ~ N(0, q_star^-) with the component sum-to-zero
// constraints; singleton regions carry no structured effect.
Eigen::VectorXd sample_log_risk(const Scenario& sc, const ScaledStructure& s,
                                RngStream& rng);

// Counts y_i ~ Poisson(E exp(eta_i)) around a freshly sampled log risk.
Dataset simulate_dataset(const Scenario& sc, const ScaledStructure& s,
                         RngStream& rng);

}  // namespace bym2
