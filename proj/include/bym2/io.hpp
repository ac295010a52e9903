#pragma once

#include <iosfwd>
#include <string>

#include "bym2/dataset.hpp"
#include "bym2/grid.hpp"
#include "bym2/scaling.hpp"
#include "bym2/sparse.hpp"

namespace bym2 {

// Count tables: whitespace-separated columns `y E [z1 ... zp]` with an
// optional header line naming the columns. Header columns named y/E (any
// case) map to counts and expected counts, a column named SMR is skipped,
// and remaining named columns become covariates in file order. Headerless
// files are positional, with one exception: exactly three columns are read
// as `y E SMR` (the shape registry exports use), so a single headerless
// covariate column needs a header to be seen as one.
Dataset read_data(std::istream& in);
Dataset read_data(const std::string& text);
Dataset read_data_file(const std::string& path);

// Header `y E [z1 ... zp]` plus one row per region, shortest exact
// decimals; read_data reproduces the dataset bit for bit.
std::string write_data(const Dataset& d);

// Symmetric sparse interchange: one `i j value` line per stored entry of
// the lower triangle, 1-based indices, column-major order, shortest exact
// decimal values. The dimension travels in the JSON sidecar, not the file.
std::string write_coo(const SymSparse& q);
SymSparse read_coo(std::istream& in, int n);
SymSparse read_coo(const std::string& text, int n);

// Sidecar describing a scaled structure; block coordinate k in the matrix
// file is region structured_regions[k-1]. Region ids are 0-based.
std::string scale_meta_json(const ScaledStructure& s);

// Complete fit result as one JSON document (summaries, latent marginals,
// diagnostics, grid metadata and points). NaN fields serialize as null.
std::string fit_result_json(const FitResult& fr);

// Fixed-width posterior summary: one row per parameter, columns
// Mean / SD / 2.5% / Median / 97.5% / Mode.
std::string fit_summary_table(const FitResult& fr);

// Plot-ready per-region table: observed, expected, raw and fitted risk,
// cpo. Regions are numbered from 1.
std::string risk_table_csv(const FitResult& fr, const Dataset& data);

}  // namespace bym2
