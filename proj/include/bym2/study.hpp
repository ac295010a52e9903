#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bym2/grid.hpp"
#include "bym2/models.hpp"
#include "bym2/simulation.hpp"

namespace bym2 {

// A model entry in the comparison: kind plus the priors it runs under.
// Separate entries may share a kind (the mixing-prior sweep runs bym2
// twice, once with the pc prior and once uniform).
struct StudyModel {
  std::string label;
  ModelKind kind = ModelKind::iid;
  PriorConfig priors;
};

struct StudyConfig {
  std::vector<Scenario> scenarios;
  std::vector<StudyModel> models;
  int replicates = 50;
  std::uint64_t seed = 1;
  int threads = 0;  // replicate-level pool; 0 = hardware concurrency
  // Coarser than the single-fit default: the study runs hundreds of fits
  // and posterior summaries average over replicates anyway.
  GridConfig grid;

  StudyConfig() {
    grid.dz = 0.5;
    grid.diff_logdens = 10.0;
  }
};

// Nine scenarios ({constant, iid, structured} x E in {15, 60, 200}) and the
// six comparison models (iid, besag, leroux, dean, bym2 under its default
// pc mixing prior, bym2 under a uniform mixing prior).
StudyConfig default_study_config();

// One fitted model on one simulated dataset. Posterior means only; the
// spread across replicates is the summary's job. phi_mean is NaN for
// models without a mixing parameter.
struct ReplicateRecord {
  std::string scenario;
  int replicate = 0;
  std::string model;
  bool ok = false;
  std::string failure;  // empty when ok
  double mu_mean = 0.0;
  double sd_tau_mean = 0.0;
  double phi_mean = 0.0;
  double rmse = 0.0;
  double dic = 0.0;
  double log_score = 0.0;
};

// Aggregate over the successful replicates of one scenario x model cell.
// *_sd fields are the spread of the posterior means across replicates.
struct StudyRow {
  std::string scenario;
  std::string model;
  int replicates = 0;
  int failures = 0;
  double mu_mean = 0.0, mu_sd = 0.0;
  double sd_tau_mean = 0.0, sd_tau_sd = 0.0;
  double phi_mean = 0.0, phi_sd = 0.0;
  double rmse_mean = 0.0;
  double dic_mean = 0.0;
  double log_score_mean = 0.0;
};

struct StudySummary {
  std::vector<StudyRow> rows;  // scenario-major, models in config order
  std::vector<ReplicateRecord> records;
};

// Simulates replicate datasets on the graph and fits every configured
// model to each. Replicates run in parallel; each consumes a random
// substream keyed by (seed, scenario index, replicate index), so results
// are bit-identical for a fixed config regardless of thread count. Failed
// fits are recorded, counted, and excluded from the row means.
StudySummary run_study(const StudyConfig& cfg, const Graph& g);

// Summary rows as CSV, one row per scenario x model.
std::string study_summary_csv(const StudySummary& s);

// Per-replicate records as JSON lines, for boxplots.
std::string study_records_jsonl(const StudySummary& s);

}  // namespace bym2
