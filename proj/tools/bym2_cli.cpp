#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bym2/errors.hpp"
#include "bym2/grid.hpp"
#include "bym2/io.hpp"
#include "bym2/models.hpp"
#include "bym2/simulation.hpp"
#include "bym2/study.hpp"

using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw bym2::error("cannot open output file: " + path);
  f << text;
  f.flush();
  if (!f) throw bym2::error("write failed: " + path);
}

int default_threads() {
  const char* s = std::getenv("BYM2_THREADS");
  if (!s) return 0;
  int v = std::atoi(s);
  return v > 0 ? v : 0;
}

bym2::Graph load_graph(const std::string& path,
                       const std::vector<int>& lattice) {
  if (!path.empty() && !lattice.empty())
    throw bym2::parse_error("give either --graph or --lattice, not both");
  if (!path.empty()) return bym2::parse_graph_file(path);
  if (!lattice.empty()) return bym2::lattice_graph(lattice[0], lattice[1]);
  throw bym2::parse_error("a graph is required (--graph FILE or --lattice R C)");
}

void check_unit_interval(double v, const std::string& flag) {
  if (!(v > 0.0 && v < 1.0))
    throw bym2::parse_error(flag + " must be in (0, 1)");
}

// Shared precision-prior flags: KIND in {pc, gamma} plus the pair of
// parameters for the selected kind.
struct PrecFlags {
  std::string kind = "pc";
  std::vector<double> pc = {0.2 / 0.31, 0.1};
  std::vector<double> gamma = {1.0, 5e-5};

  void add(CLI::App* cmd, const std::string& stem, const std::string& what) {
    cmd->add_option("--" + stem + "-prior", kind, "Prior family for " + what)
        ->check(CLI::IsMember({"pc", "gamma"}))
        ->capture_default_str();
    cmd->add_option("--" + stem + "-pc", pc,
                    "PC prior parameters U ALPHA for " + what +
                        ": Prob(1/sqrt(tau) > U) = ALPHA")
        ->expected(2);
    cmd->add_option("--" + stem + "-gamma", gamma,
                    "Gamma prior parameters SHAPE RATE for " + what)
        ->expected(2);
  }

  bym2::PrecPrior build(const std::string& stem) const {
    if (kind == "gamma") {
      if (!(gamma[0] > 0.0) || !(gamma[1] > 0.0))
        throw bym2::parse_error("--" + stem + "-gamma parameters must be > 0");
      return bym2::PrecPrior::gamma(gamma[0], gamma[1]);
    }
    if (!(pc[0] > 0.0))
      throw bym2::parse_error("--" + stem + "-pc U must be > 0");
    check_unit_interval(pc[1], "--" + stem + "-pc ALPHA");
    return bym2::PrecPrior::pc(pc[0], pc[1]);
  }
};

// ---------------------------------------------------------------- scale --

struct ScaleArgs {
  std::string graph;
  std::vector<int> lattice;
  std::string out_matrix = "scaled_matrix.txt";
  std::string out_meta = "scale_meta.json";
};

void run_scale(const ScaleArgs& a) {
  bym2::Graph g = load_graph(a.graph, a.lattice);
  bym2::ScaledStructure s = bym2::scale_structured(g);
  write_text(a.out_matrix, bym2::write_coo(s.q_star));
  write_text(a.out_meta, bym2::scale_meta_json(s));
}

// ------------------------------------------------------------ prior-phi --

struct PriorPhiArgs {
  std::string graph;
  std::vector<int> lattice;
  double u = 0.5;
  double alpha = 2.0 / 3.0;
  int points = 999;
  std::string out = "-";
};

void run_prior_phi(const PriorPhiArgs& a) {
  check_unit_interval(a.u, "--u");
  check_unit_interval(a.alpha, "--alpha");
  if (a.points < 2) throw bym2::parse_error("--points must be at least 2");
  bym2::Graph g = load_graph(a.graph, a.lattice);
  bym2::ScaledStructure s = bym2::scale_structured(g);
  bym2::PhiPriorTable table = bym2::PhiPriorTable::pc(s, a.u, a.alpha);

  const double step = 1.0 / (a.points + 1);
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "# lambda %.12g\n", table.lambda());
  out += buf;
  std::snprintf(buf, sizeof buf, "# mass_below_first %.12g\n",
                table.cdf(step));
  out += buf;
  std::snprintf(buf, sizeof buf, "# mass_above_last %.12g\n",
                table.tail_mass(a.points * step));
  out += buf;
  out += "phi,density,log_density\n";
  for (int k = 1; k <= a.points; ++k) {
    double phi = k * step;
    double ld = table.log_density(phi);
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", phi, std::exp(ld),
                  ld);
    out += buf;
  }
  write_text(a.out, out);
}

// ------------------------------------------------------------------ fit --

struct FitArgs {
  std::string graph;
  std::vector<int> lattice;
  std::string data;
  std::string model = "bym2";
  PrecFlags tau;
  PrecFlags tau2;
  std::string phi_prior = "default";
  std::vector<double> phi_pc = {0.5, 2.0 / 3.0};
  bool scaled_dean = false;
  bym2::GridConfig grid;
  std::string out_json = "fit_result.json";
  std::string out_risk = "risk_table.csv";
};

bym2::PriorConfig build_priors(const FitArgs& a) {
  bym2::PriorConfig p;
  p.tau = a.tau.build("tau");
  p.tau_u = a.tau2.build("tau2");
  if (a.phi_prior == "pc") p.phi = bym2::PriorConfig::Phi::pc;
  if (a.phi_prior == "uniform") p.phi = bym2::PriorConfig::Phi::uniform;
  check_unit_interval(a.phi_pc[0], "--phi-pc U");
  check_unit_interval(a.phi_pc[1], "--phi-pc ALPHA");
  p.phi_u = a.phi_pc[0];
  p.phi_alpha = a.phi_pc[1];
  p.scaled_dean = a.scaled_dean;
  return p;
}

void run_fit(const FitArgs& a) {
  bym2::Graph g = load_graph(a.graph, a.lattice);
  bym2::Dataset data = bym2::read_data_file(a.data);
  if (data.n() != g.n)
    throw bym2::parse_error("data has " + std::to_string(data.n()) +
                            " rows but the graph has " + std::to_string(g.n) +
                            " regions");
  bym2::ModelKind kind = bym2::model_kind_from_string(a.model);
  bym2::LatentModel model = bym2::build_latent_model(kind, g, build_priors(a));
  bym2::FitResult fr = bym2::fit(model, data, a.grid);
  write_text(a.out_json, bym2::fit_result_json(fr));
  write_text(a.out_risk, bym2::risk_table_csv(fr, data));
  std::cout << bym2::fit_summary_table(fr);
}

// ------------------------------------------------------------- simulate --

struct SimArgs {
  std::string graph;
  std::vector<int> lattice;
  std::string risk = "constant";
  double sigma = 0.0;
  double e_level = 60.0;
  double mu = 0.0;
  unsigned long long seed = 1;
  std::string out = "-";
};

void run_simulate(const SimArgs& a) {
  bym2::Graph g = load_graph(a.graph, a.lattice);
  bym2::Scenario sc;
  sc.risk_kind = bym2::risk_kind_from_string(a.risk);
  sc.sigma = a.sigma;
  sc.e_level = a.e_level;
  sc.mu = a.mu;
  sc.validate();
  bym2::ScaledStructure s = bym2::scale_structured(g);
  bym2::RngStream rng = bym2::RngStream::substream(a.seed, 0, 0);
  bym2::Dataset d = bym2::simulate_dataset(sc, s, rng);
  write_text(a.out, bym2::write_data(d));
}

// ---------------------------------------------------------------- study --

struct StudyArgs {
  std::string config;
  std::string graph;
  std::vector<int> lattice;
  int replicates = -1;   // <0: keep config value
  long long seed = -1;   // <0: keep config value
  int threads = -1;      // <0: keep config value
  std::string out_csv = "study_summary.csv";
  std::string out_jsonl = "study_records.jsonl";
};

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok)
      throw bym2::parse_error("unknown key '" + it.key() + "' in " + context);
  }
}

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw bym2::error("cannot open config file: " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw bym2::parse_error(std::string("config: ") + e.what());
  }
}

bym2::PrecPrior prec_prior_from_json(const json& j, const std::string& ctx) {
  check_keys(j, {"kind", "u", "alpha", "shape", "rate"}, ctx);
  std::string kind = j.value("kind", "pc");
  if (kind == "pc") {
    double u = j.value("u", 0.2 / 0.31);
    double alpha = j.value("alpha", 0.1);
    if (!(u > 0.0)) throw bym2::parse_error(ctx + ": u must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw bym2::parse_error(ctx + ": alpha must be in (0, 1)");
    return bym2::PrecPrior::pc(u, alpha);
  }
  if (kind == "gamma") {
    double shape = j.value("shape", 1.0);
    double rate = j.value("rate", 5e-5);
    if (!(shape > 0.0) || !(rate > 0.0))
      throw bym2::parse_error(ctx + ": shape and rate must be > 0");
    return bym2::PrecPrior::gamma(shape, rate);
  }
  throw bym2::parse_error(ctx + ": unknown prior kind '" + kind + "'");
}

bym2::Scenario scenario_from_json(const json& j, size_t idx) {
  std::string ctx = "scenarios[" + std::to_string(idx) + "]";
  if (!j.is_object()) throw bym2::parse_error(ctx + " must be an object");
  check_keys(j, {"risk", "sigma", "e_level", "mu"}, ctx);
  bym2::Scenario sc;
  if (!j.contains("risk")) throw bym2::parse_error(ctx + " needs a risk kind");
  sc.risk_kind = bym2::risk_kind_from_string(j.at("risk").get<std::string>());
  sc.sigma = j.value("sigma", 0.0);
  sc.e_level = j.value("e_level", 60.0);
  sc.mu = j.value("mu", 0.0);
  sc.validate();
  return sc;
}

bym2::StudyModel model_from_json(const json& j, size_t idx) {
  std::string ctx = "models[" + std::to_string(idx) + "]";
  if (!j.is_object()) throw bym2::parse_error(ctx + " must be an object");
  check_keys(j,
             {"label", "kind", "tau", "tau_u", "phi", "phi_u", "phi_alpha",
              "scaled_dean"},
             ctx);
  if (!j.contains("kind")) throw bym2::parse_error(ctx + " needs a model kind");
  bym2::StudyModel m;
  m.kind = bym2::model_kind_from_string(j.at("kind").get<std::string>());
  m.label = j.value("label", bym2::to_string(m.kind));
  if (j.contains("tau"))
    m.priors.tau = prec_prior_from_json(j.at("tau"), ctx + ".tau");
  if (j.contains("tau_u"))
    m.priors.tau_u = prec_prior_from_json(j.at("tau_u"), ctx + ".tau_u");
  std::string phi = j.value("phi", "default");
  if (phi == "pc") {
    m.priors.phi = bym2::PriorConfig::Phi::pc;
  } else if (phi == "uniform") {
    m.priors.phi = bym2::PriorConfig::Phi::uniform;
  } else if (phi != "default") {
    throw bym2::parse_error(ctx + ": unknown phi prior '" + phi + "'");
  }
  m.priors.phi_u = j.value("phi_u", m.priors.phi_u);
  m.priors.phi_alpha = j.value("phi_alpha", m.priors.phi_alpha);
  if (!(m.priors.phi_u > 0.0 && m.priors.phi_u < 1.0))
    throw bym2::parse_error(ctx + ": phi_u must be in (0, 1)");
  if (!(m.priors.phi_alpha > 0.0 && m.priors.phi_alpha < 1.0))
    throw bym2::parse_error(ctx + ": phi_alpha must be in (0, 1)");
  m.priors.scaled_dean = j.value("scaled_dean", false);
  return m;
}

void run_study(const StudyArgs& a) {
  bym2::StudyConfig cfg = bym2::default_study_config();
  std::string cfg_graph;
  std::vector<int> cfg_lattice;

  if (!a.config.empty()) {
    json j = load_json(a.config);
    if (!j.is_object()) throw bym2::parse_error("config must be a JSON object");
    check_keys(j,
               {"seed", "replicates", "threads", "grid", "graph", "lattice",
                "scenarios", "models"},
               "config");
    if (j.contains("seed")) cfg.seed = j.at("seed").get<unsigned long long>();
    if (j.contains("replicates")) {
      cfg.replicates = j.at("replicates").get<int>();
    }
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      check_keys(g, {"dz", "diff_logdens", "max_points"}, "config.grid");
      cfg.grid.dz = g.value("dz", cfg.grid.dz);
      cfg.grid.diff_logdens = g.value("diff_logdens", cfg.grid.diff_logdens);
      cfg.grid.max_points = g.value("max_points", cfg.grid.max_points);
    }
    if (j.contains("graph")) cfg_graph = j.at("graph").get<std::string>();
    if (j.contains("lattice")) {
      cfg_lattice = j.at("lattice").get<std::vector<int>>();
      if (cfg_lattice.size() != 2)
        throw bym2::parse_error("config.lattice must be [rows, cols]");
    }
    if (j.contains("scenarios")) {
      const json& ss = j.at("scenarios");
      if (!ss.is_array() || ss.empty())
        throw bym2::parse_error("config.scenarios must be a nonempty array");
      cfg.scenarios.clear();
      for (size_t i = 0; i < ss.size(); ++i)
        cfg.scenarios.push_back(scenario_from_json(ss[i], i));
    }
    if (j.contains("models")) {
      const json& ms = j.at("models");
      if (!ms.is_array() || ms.empty())
        throw bym2::parse_error("config.models must be a nonempty array");
      cfg.models.clear();
      for (size_t i = 0; i < ms.size(); ++i)
        cfg.models.push_back(model_from_json(ms[i], i));
    }
  }

  if (a.replicates >= 0) cfg.replicates = a.replicates;
  if (a.seed >= 0) cfg.seed = static_cast<unsigned long long>(a.seed);
  if (a.threads >= 0) cfg.threads = a.threads;
  if (cfg.replicates < 1)
    throw bym2::parse_error("replicates must be at least 1");

  bym2::Graph g;
  if (!a.graph.empty() || !a.lattice.empty()) {
    g = load_graph(a.graph, a.lattice);
  } else if (!cfg_graph.empty()) {
    g = bym2::parse_graph_file(cfg_graph);
  } else if (!cfg_lattice.empty()) {
    g = bym2::lattice_graph(cfg_lattice[0], cfg_lattice[1]);
  } else {
    g = bym2::lattice_graph(10, 10);
  }

  bym2::StudySummary summary = bym2::run_study(cfg, g);
  write_text(a.out_csv, bym2::study_summary_csv(summary));
  write_text(a.out_jsonl, bym2::study_records_jsonl(summary));
}

void add_graph_flags(CLI::App* cmd, std::string* graph,
                     std::vector<int>* lattice) {
  cmd->add_option("--graph", *graph, "Adjacency graph file");
  cmd->add_option("--lattice", *lattice,
                  "Rook-adjacency lattice ROWS COLS instead of a graph file")
      ->expected(2);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaled spatial smoothing models for areal count data"};
  app.require_subcommand(1);

  ScaleArgs scale_args;
  CLI::App* scale =
      app.add_subcommand("scale", "Scale a graph's structured precision");
  add_graph_flags(scale, &scale_args.graph, &scale_args.lattice);
  scale->add_option("--out-matrix", scale_args.out_matrix,
                    "Scaled matrix in coordinate format ('-' for stdout)")
      ->capture_default_str();
  scale->add_option("--out-meta", scale_args.out_meta,
                    "JSON metadata sidecar ('-' for stdout)")
      ->capture_default_str();
  scale->callback([&scale_args] { run_scale(scale_args); });

  PriorPhiArgs phi_args;
  CLI::App* prior_phi = app.add_subcommand(
      "prior-phi", "Tabulate the mixing-parameter prior density");
  add_graph_flags(prior_phi, &phi_args.graph, &phi_args.lattice);
  prior_phi->add_option("--u", phi_args.u, "Tail threshold: Prob(phi > U) = alpha")
      ->capture_default_str();
  prior_phi->add_option("--alpha", phi_args.alpha, "Tail mass above U")
      ->capture_default_str();
  prior_phi->add_option("--points", phi_args.points,
                        "Grid points k/(points+1), k = 1..points")
      ->capture_default_str();
  prior_phi->add_option("--out", phi_args.out, "CSV output ('-' for stdout)")
      ->capture_default_str();
  prior_phi->callback([&phi_args] { run_prior_phi(phi_args); });

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model to count data");
  add_graph_flags(fit, &fit_args.graph, &fit_args.lattice);
  fit->add_option("--data", fit_args.data, "Count table (y E [covariates])")
      ->required();
  fit->add_option("--model", fit_args.model, "Model kind")
      ->check(CLI::IsMember({"iid", "besag", "bym", "leroux", "dean", "bym2"}))
      ->capture_default_str();
  fit_args.tau.add(fit, "tau", "the precision");
  fit_args.tau2.add(fit, "tau2", "the second precision (bym only)");
  fit->add_option("--phi-prior", fit_args.phi_prior,
                  "Mixing prior: default picks PC for bym2, uniform for "
                  "leroux and dean")
      ->check(CLI::IsMember({"default", "pc", "uniform"}))
      ->capture_default_str();
  fit->add_option("--phi-pc", fit_args.phi_pc,
                  "PC mixing prior parameters U ALPHA: Prob(phi < U) = ALPHA")
      ->expected(2);
  fit->add_flag("--scaled-dean", fit_args.scaled_dean,
                "Use the scaled structure in the dean model");
  fit->add_option("--dz", fit_args.grid.dz, "Hyperparameter grid step")
      ->capture_default_str();
  fit->add_option("--diff-logdens", fit_args.grid.diff_logdens,
                  "Log-density drop at which the grid stops expanding")
      ->capture_default_str();
  fit->add_option("--max-points", fit_args.grid.max_points,
                  "Hard cap on grid size")
      ->capture_default_str();
  fit->add_option("--fe-variance", fit_args.grid.fe_prior_variance,
                  "Prior variance of the intercept and covariate effects")
      ->capture_default_str();
  fit->add_option("--threads", fit_args.grid.threads,
                  "Worker threads (0 = all cores)");
  fit->add_option("--approx-max-iterations", fit_args.grid.approx.max_iterations,
                  "Newton iteration cap for the latent-field approximation")
      ->group("Advanced");
  fit->add_option("--approx-tolerance", fit_args.grid.approx.tolerance,
                  "Newton convergence tolerance on the latent field")
      ->group("Advanced");
  fit->add_option("--out-json", fit_args.out_json,
                  "Full fit result as JSON ('-' for stdout)")
      ->capture_default_str();
  fit->add_option("--out-risk", fit_args.out_risk,
                  "Per-region risk table as CSV ('-' for stdout)")
      ->capture_default_str();
  fit->callback([&fit_args] { run_fit(fit_args); });

  SimArgs sim_args;
  CLI::App* sim =
      app.add_subcommand("simulate", "Draw one dataset from a risk scenario");
  add_graph_flags(sim, &sim_args.graph, &sim_args.lattice);
  sim->add_option("--risk", sim_args.risk, "Risk surface kind")
      ->check(CLI::IsMember({"constant", "iid", "structured"}))
      ->capture_default_str();
  sim->add_option("--sigma", sim_args.sigma, "Log-risk standard deviation")
      ->capture_default_str();
  sim->add_option("--e-level", sim_args.e_level, "Expected count per region")
      ->capture_default_str();
  sim->add_option("--mu", sim_args.mu, "Log-risk baseline")
      ->capture_default_str();
  sim->add_option("--seed", sim_args.seed, "Random seed")
      ->capture_default_str();
  sim->add_option("--out", sim_args.out, "Dataset output ('-' for stdout)")
      ->capture_default_str();
  sim->callback([&sim_args] { run_simulate(sim_args); });

  StudyArgs study_args;
  CLI::App* study = app.add_subcommand(
      "study", "Run a simulation study across scenarios and models");
  study->add_option("--config", study_args.config,
                    "JSON study configuration; omitted sections use the "
                    "default nine-scenario, six-model matrix");
  add_graph_flags(study, &study_args.graph, &study_args.lattice);
  study->add_option("--replicates", study_args.replicates,
                    "Replicates per scenario (overrides config)");
  study->add_option("--seed", study_args.seed, "Master seed (overrides config)");
  study->add_option("--threads", study_args.threads,
                    "Worker threads, 0 = all cores (overrides config)");
  study->add_option("--out-csv", study_args.out_csv,
                    "Summary table ('-' for stdout)")
      ->capture_default_str();
  study->add_option("--out-jsonl", study_args.out_jsonl,
                    "Per-replicate records as JSON lines ('-' for stdout)")
      ->capture_default_str();
  study->callback([&study_args] { run_study(study_args); });

  if (int t = default_threads(); t > 0) {
    fit_args.grid.threads = t;
    study_args.threads = t;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const bym2::numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const bym2::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
