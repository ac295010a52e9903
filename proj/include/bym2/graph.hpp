#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bym2/sparse.hpp"

namespace bym2 {

// Undirected region adjacency. Neighbour lists are sorted, free of
// self-loops and duplicates, and symmetric after construction.
struct Graph {
  int n = 0;
  std::vector<std::vector<int>> neighbours;
  // One-sided adjacency entries repaired during parsing.
  int symmetrized_pairs = 0;

  int degree(int i) const { return static_cast<int>(neighbours[i].size()); }
};

// Parse the region-per-line format: first line n, then one line per region
// `index k nb_1 ... nb_k`. The index base is detected: any 0 index means
// 0-based; indices covering exactly 1..n mean 1-based; anything else is
// rejected. Throws parse_error with a 1-based line number.
Graph parse_graph(std::istream& in);
Graph parse_graph(const std::string& text);
Graph parse_graph_file(const std::string& path);

// Normalized serialization (0-based, sorted neighbour lists). Parsing the
// output reproduces the graph exactly.
std::string serialize_graph(const Graph& g);

// Component label per region; labels are assigned in order of each
// component's smallest member index, so the labeling is deterministic.
std::vector<int> connected_components(const Graph& g, int* n_components);

// Q with Q_ii = degree, Q_ij = -1 for neighbours. Row sums are exactly 0;
// rank deficiency equals the number of connected components.
SymSparse besag_precision(const Graph& g);

}  // namespace bym2
