#include "bym2/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <sstream>

#include "bym2/errors.hpp"

namespace bym2 {

namespace {

struct RawLine {
  int line_no;
  long index;
  std::vector<long> nbs;
};

long parse_long(const std::string& tok, int line_no) {
  size_t pos = 0;
  long v;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    throw parse_error("expected an integer, got '" + tok + "'", line_no);
  }
  if (pos != tok.size())
    throw parse_error("expected an integer, got '" + tok + "'", line_no);
  return v;
}

}  // namespace

Graph parse_graph(std::istream& in) {
  std::string line;
  int line_no = 0;

  // header: region count
  long n = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // skip blank lines
    n = parse_long(tok, line_no);
    std::string extra;
    if (ls >> extra)
      throw parse_error("header must contain the region count only", line_no);
    break;
  }
  if (n < 0) throw parse_error("empty graph file", line_no > 0 ? line_no : 1);
  if (n == 0) throw parse_error("graph must have at least one region", line_no);

  std::vector<RawLine> rows;
  rows.reserve(static_cast<size_t>(n));
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    RawLine r;
    r.line_no = line_no;
    r.index = parse_long(tok, line_no);
    if (!(ls >> tok))
      throw parse_error("missing neighbour count", line_no);
    long k = parse_long(tok, line_no);
    if (k < 0) throw parse_error("negative neighbour count", line_no);
    while (ls >> tok) r.nbs.push_back(parse_long(tok, line_no));
    if (static_cast<long>(r.nbs.size()) != k)
      throw parse_error("declared " + std::to_string(k) + " neighbours, found " +
                            std::to_string(r.nbs.size()),
                        line_no);
    rows.push_back(std::move(r));
  }
  if (static_cast<long>(rows.size()) != n)
    throw parse_error("expected " + std::to_string(n) + " region lines, found " +
                          std::to_string(rows.size()),
                      line_no > 0 ? line_no : 1);

  // Index-base detection over all region and neighbour indices.
  bool any_zero = false;
  long min_idx = n, max_idx = -1;
  auto scan = [&](long v) {
    if (v == 0) any_zero = true;
    min_idx = std::min(min_idx, v);
    max_idx = std::max(max_idx, v);
  };
  for (const auto& r : rows) {
    scan(r.index);
    for (long v : r.nbs) scan(v);
  }
  int base;
  if (any_zero)
    base = 0;
  else if (min_idx >= 1 && max_idx <= n)
    base = 1;
  else
    throw parse_error("cannot detect index base: no index 0 and indices not within 1.." +
                          std::to_string(n),
                      rows.front().line_no);

  Graph g;
  g.n = static_cast<int>(n);
  g.neighbours.assign(g.n, {});
  std::vector<int> seen(g.n, 0);
  for (const auto& r : rows) {
    long idx = r.index - base;
    if (idx < 0 || idx >= n)
      throw parse_error("region index " + std::to_string(r.index) + " out of range",
                        r.line_no);
    if (seen[idx]++)
      throw parse_error("duplicate region line for index " + std::to_string(r.index),
                        r.line_no);
    auto& nb = g.neighbours[idx];
    for (long v : r.nbs) {
      long j = v - base;
      if (j < 0 || j >= n)
        throw parse_error("neighbour index " + std::to_string(v) + " out of range",
                          r.line_no);
      if (j == idx)
        throw parse_error("region " + std::to_string(r.index) + " lists itself as a neighbour",
                          r.line_no);
      nb.push_back(static_cast<int>(j));
    }
    std::sort(nb.begin(), nb.end());
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
      throw parse_error("duplicate neighbour in region " + std::to_string(r.index),
                        r.line_no);
  }

  // Symmetrize one-sided entries, counting repairs.
  int repairs = 0;
  for (int i = 0; i < g.n; ++i) {
    for (int j : g.neighbours[i]) {
      const auto& nj = g.neighbours[j];
      if (!std::binary_search(nj.begin(), nj.end(), i)) ++repairs;
    }
  }
  if (repairs > 0) {
    for (int i = 0; i < g.n; ++i) {
      for (int j : g.neighbours[i]) {
        auto& nj = g.neighbours[j];
        if (!std::binary_search(nj.begin(), nj.end(), i))
          nj.insert(std::upper_bound(nj.begin(), nj.end(), i), i);
      }
    }
  }
  g.symmetrized_pairs = repairs;
  return g;
}

Graph parse_graph(const std::string& text) {
  std::istringstream in(text);
  return parse_graph(in);
}

Graph parse_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open graph file: " + path);
  return parse_graph(in);
}

std::string serialize_graph(const Graph& g) {
  std::ostringstream out;
  out << g.n << "\n";
  for (int i = 0; i < g.n; ++i) {
    out << i << " " << g.neighbours[i].size();
    for (int j : g.neighbours[i]) out << " " << j;
    out << "\n";
  }
  return out.str();
}

std::vector<int> connected_components(const Graph& g, int* n_components) {
  std::vector<int> label(g.n, -1);
  int next = 0;
  for (int s = 0; s < g.n; ++s) {
    if (label[s] >= 0) continue;
    std::deque<int> queue{s};
    label[s] = next;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : g.neighbours[u]) {
        if (label[v] < 0) {
          label[v] = next;
          queue.push_back(v);
        }
      }
    }
    ++next;
  }
  if (n_components) *n_components = next;
  return label;
}

SymSparse besag_precision(const Graph& g) {
  Triplets t;
  for (int i = 0; i < g.n; ++i) {
    t.emplace_back(i, i, static_cast<double>(g.degree(i)));
    for (int j : g.neighbours[i])
      if (j < i) t.emplace_back(i, j, -1.0);
  }
  return SymSparse::from_triplets(g.n, t);
}

}  // namespace bym2
