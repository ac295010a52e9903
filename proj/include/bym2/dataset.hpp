#pragma once

#include <cmath>

#include <Eigen/Core>

#include "bym2/errors.hpp"

namespace bym2 {

// One areal dataset: counts, expected counts, optional covariate columns.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd e;
  Eigen::MatrixXd z;  // n x p, p may be zero for intercept-only analyses

  int n() const { return static_cast<int>(y.size()); }

  void validate() const {
    if (y.size() == 0) throw error("dataset is empty");
    if (e.size() != y.size()) {
      throw error("counts and expected counts differ in length");
    }
    if (z.size() > 0 && z.rows() != y.size()) {
      throw error("covariate rows do not match the number of regions");
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!(y(i) >= 0.0) || !std::isfinite(y(i))) {
        throw error("counts must be finite and nonnegative");
      }
      if (!(e(i) > 0.0) || !std::isfinite(e(i))) {
        throw error("expected counts must be finite and positive");
      }
    }
    if (z.size() > 0 && !z.allFinite()) throw error("covariates must be finite");
  }
};

}  // namespace bym2
