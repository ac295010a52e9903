#pragma once

#include <vector>

#include "bym2/constraints.hpp"
#include "bym2/graph.hpp"
#include "bym2/sparse.hpp"

namespace bym2 {

// Besag structure scaled so each connected component's constrained marginal
// variances have geometric mean 1. Singleton regions carry no structured
// effect: they are excluded from the structured block and listed instead.
struct ScaledStructure {
  int n = 0;                     // regions in the source graph
  SymSparse q_star;              // structured block, over structured regions
  std::vector<double> scale_factors;  // sigma^2_GV per non-singleton component
  int rank_deficiency = 0;       // = number of non-singleton components
  ConstraintSet constraints;     // one sum-to-zero row per non-singleton component
  std::vector<int> singleton_regions;
  std::vector<int> structured_regions;  // region ids in block order
  std::vector<int> structured_index;    // region -> block index, -1 singleton
  std::vector<int> component_of;        // full component labeling
  int n_components = 0;                 // including singleton components

  int n_structured() const {
    return static_cast<int>(structured_regions.size());
  }
};

// Geometric mean of the constrained marginal variances, one value per
// constraint row (component). jitter_scale is relative to the mean diagonal.
std::vector<double> generalized_variance(const SymSparse& q,
                                         const ConstraintSet& c,
                                         double jitter_scale = 1e-6);

// Scale each non-singleton component block of the Besag structure by its
// own generalized variance.
ScaledStructure scale_structured(const Graph& g, double jitter_scale = 1e-6);

}  // namespace bym2
