#include "bym2/scaling.hpp"

#include <cmath>

#include "bym2/errors.hpp"

namespace bym2 {

std::vector<double> generalized_variance(const SymSparse& q,
                                         const ConstraintSet& c,
                                         double jitter_scale) {
  double jitter = jitter_scale * q.mean_diagonal();
  Eigen::VectorXd v = constrained_marginal_variances(q, c, jitter);
  std::vector<double> out;
  out.reserve(c.count());
  for (int r = 0; r < c.count(); ++r) {
    double s = 0.0;
    int m = 0;
    for (int i = 0; i < q.n; ++i) {
      if (c.a(r, i) != 0.0) {
        if (v(i) <= 0.0) throw numeric_error("nonpositive marginal variance");
        s += std::log(v(i));
        ++m;
      }
    }
    if (m == 0) throw numeric_error("empty constraint row");
    out.push_back(std::exp(s / m));
  }
  return out;
}

ScaledStructure scale_structured(const Graph& g, double jitter_scale) {
  ScaledStructure s;
  s.n = g.n;
  s.component_of = connected_components(g, &s.n_components);

  // Component sizes; singletons drop out of the structured block.
  std::vector<int> comp_size(s.n_components, 0);
  for (int i = 0; i < g.n; ++i) ++comp_size[s.component_of[i]];

  s.structured_index.assign(g.n, -1);
  for (int i = 0; i < g.n; ++i) {
    if (comp_size[s.component_of[i]] >= 2) {
      s.structured_index[i] = static_cast<int>(s.structured_regions.size());
      s.structured_regions.push_back(i);
    } else {
      s.singleton_regions.push_back(i);
    }
  }

  // Non-singleton components keep their relative order.
  std::vector<int> comp_slot(s.n_components, -1);
  int n_struct_comp = 0;
  for (int c = 0; c < s.n_components; ++c)
    if (comp_size[c] >= 2) comp_slot[c] = n_struct_comp++;
  s.rank_deficiency = n_struct_comp;

  const int ns = s.n_structured();
  if (ns == 0) {
    s.q_star = SymSparse();  // empty structured block
    s.constraints = ConstraintSet::none(0);
    return s;
  }

  // Besag block over structured regions (separate components never touch,
  // so one matrix holds all blocks).
  Triplets t;
  for (int bi = 0; bi < ns; ++bi) {
    int i = s.structured_regions[bi];
    t.emplace_back(bi, bi, static_cast<double>(g.degree(i)));
    for (int j : g.neighbours[i]) {
      int bj = s.structured_index[j];
      if (bj >= 0 && bj < bi) t.emplace_back(bi, bj, -1.0);
    }
  }
  SymSparse q = SymSparse::from_triplets(ns, t);

  // One sum-to-zero row per non-singleton component.
  ConstraintSet c;
  c.a = Eigen::MatrixXd::Zero(n_struct_comp, ns);
  c.e = Eigen::VectorXd::Zero(n_struct_comp);
  for (int bi = 0; bi < ns; ++bi)
    c.a(comp_slot[s.component_of[s.structured_regions[bi]]], bi) = 1.0;

  s.scale_factors = generalized_variance(q, c, jitter_scale);

  // q_star = sigma^2_GV * Q blockwise.
  Triplets ts;
  ts.reserve(t.size());
  for (const auto& e : t) {
    int comp = comp_slot[s.component_of[s.structured_regions[e.row()]]];
    ts.emplace_back(e.row(), e.col(), e.value() * s.scale_factors[comp]);
  }
  s.q_star = SymSparse::from_triplets(ns, ts);
  s.constraints = c;
  return s;
}

}  // namespace bym2
