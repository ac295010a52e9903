#include "bym2/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "bym2/errors.hpp"

namespace bym2 {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& tok, double* out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto r = std::from_chars(b, e, *out);
  return r.ec == std::errc() && r.ptr == e;
}

double parse_double_or_throw(const std::string& tok, int line) {
  double v;
  if (!parse_double(tok, &v))
    throw parse_error("expected a number, got '" + tok + "'", line);
  return v;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Shortest decimal that parses back to the same double.
std::string exact_decimal(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

nlohmann::json summary_json(const SummaryStats& s) {
  return {{"name", s.name},     {"mean", s.mean},     {"sd", s.sd},
          {"q025", s.q025},     {"median", s.median}, {"q975", s.q975},
          {"mode", s.mode}};
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void append_table_row(std::string& out, const std::string& name,
                      const SummaryStats& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "%-14s %10.4f %10.4f %10.4f %10.4f %10.4f %10.4f\n",
                name.c_str(), s.mean, s.sd, s.q025, s.median, s.q975, s.mode);
  out += buf;
}

}  // namespace

Dataset read_data(std::istream& in) {
  std::string line;
  int line_no = 0;
  int width = -1;
  // column roles: 0 = y, 1 = E, -1 = skipped, k >= 2 = covariate k-2
  std::vector<int> role;
  std::vector<double> ys, es;
  std::vector<std::vector<double>> zs;  // one vector per covariate

  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> toks = split_ws(line);
    if (toks.empty()) continue;

    if (width < 0) {
      // first content line: a header if any token is not a number
      bool numeric = true;
      for (const auto& t : toks) {
        double v;
        if (!parse_double(t, &v)) {
          numeric = false;
          break;
        }
      }
      width = static_cast<int>(toks.size());
      if (width < 2)
        throw parse_error("need at least two columns (y and E)", line_no);
      role.assign(static_cast<size_t>(width), -1);
      if (!numeric) {
        int y_at = -1, e_at = -1, next_cov = 2;
        for (int c = 0; c < width; ++c) {
          std::string name = lower(toks[static_cast<size_t>(c)]);
          if (name == "y") {
            if (y_at >= 0) throw parse_error("duplicate y column", line_no);
            y_at = c;
            role[static_cast<size_t>(c)] = 0;
          } else if (name == "e") {
            if (e_at >= 0) throw parse_error("duplicate E column", line_no);
            e_at = c;
            role[static_cast<size_t>(c)] = 1;
          } else if (name == "smr") {
            role[static_cast<size_t>(c)] = -1;
          } else {
            role[static_cast<size_t>(c)] = next_cov++;
          }
        }
        if (y_at < 0 || e_at < 0)
          throw parse_error("header must name y and E columns", line_no);
        zs.resize(static_cast<size_t>(next_cov - 2));
        continue;  // header consumed
      }
      // headerless: positional, with the three-column registry shape
      role[0] = 0;
      role[1] = 1;
      if (width == 3) {
        role[2] = -1;  // y E SMR
      } else {
        for (int c = 2; c < width; ++c) role[static_cast<size_t>(c)] = c;
        zs.resize(static_cast<size_t>(width - 2));
      }
      // fall through: this line is data
    }

    if (static_cast<int>(toks.size()) != width)
      throw parse_error("expected " + std::to_string(width) +
                            " columns, got " + std::to_string(toks.size()),
                        line_no);
    double y = 0.0, e = 0.0;
    std::vector<double> z(zs.size(), 0.0);
    for (int c = 0; c < width; ++c) {
      int r = role[static_cast<size_t>(c)];
      if (r < 0) continue;
      double v = parse_double_or_throw(toks[static_cast<size_t>(c)], line_no);
      if (!std::isfinite(v))
        throw parse_error("nonfinite value", line_no);
      if (r == 0) {
        if (v < 0.0) throw parse_error("negative count", line_no);
        y = v;
      } else if (r == 1) {
        if (v <= 0.0)
          throw parse_error("expected count must be positive", line_no);
        e = v;
      } else {
        z[static_cast<size_t>(r - 2)] = v;
      }
    }
    ys.push_back(y);
    es.push_back(e);
    for (size_t j = 0; j < zs.size(); ++j) zs[j].push_back(z[j]);
  }

  if (ys.empty()) throw parse_error("no data rows", line_no);
  Dataset d;
  const int n = static_cast<int>(ys.size());
  d.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  d.e = Eigen::Map<Eigen::VectorXd>(es.data(), n);
  d.z.resize(n, static_cast<Eigen::Index>(zs.size()));
  for (size_t j = 0; j < zs.size(); ++j) {
    d.z.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<Eigen::VectorXd>(zs[j].data(), n);
  }
  d.validate();
  return d;
}

Dataset read_data(const std::string& text) {
  std::istringstream ss(text);
  return read_data(ss);
}

Dataset read_data_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw error("cannot open data file: " + path);
  return read_data(f);
}

std::string write_data(const Dataset& d) {
  std::string out = "y E";
  for (Eigen::Index j = 0; j < d.z.cols(); ++j) {
    out += " z" + std::to_string(j + 1);
  }
  out += '\n';
  for (int i = 0; i < d.n(); ++i) {
    out += exact_decimal(d.y(i));
    out += ' ';
    out += exact_decimal(d.e(i));
    for (Eigen::Index j = 0; j < d.z.cols(); ++j) {
      out += ' ';
      out += exact_decimal(d.z(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string write_coo(const SymSparse& q) {
  std::string out;
  for (int j = 0; j < q.lower.outerSize(); ++j) {
    for (SpMat::InnerIterator it(q.lower, j); it; ++it) {
      out += std::to_string(it.row() + 1);
      out += ' ';
      out += std::to_string(it.col() + 1);
      out += ' ';
      out += exact_decimal(it.value());
      out += '\n';
    }
  }
  return out;
}

SymSparse read_coo(std::istream& in, int n) {
  if (n < 0) throw error("read_coo: dimension must be nonnegative");
  std::string line;
  int line_no = 0;
  Triplets ts;
  std::set<std::pair<int, int>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 3)
      throw parse_error("expected 'i j value'", line_no);
    double di = parse_double_or_throw(toks[0], line_no);
    double dj = parse_double_or_throw(toks[1], line_no);
    double v = parse_double_or_throw(toks[2], line_no);
    int i = static_cast<int>(di);
    int j = static_cast<int>(dj);
    if (di != i || dj != j)
      throw parse_error("indices must be integers", line_no);
    if (i < 1 || j < 1 || i > n || j > n)
      throw parse_error("index out of range for dimension " +
                            std::to_string(n),
                        line_no);
    if (j > i)
      throw parse_error("upper-triangle entry; store the lower triangle",
                        line_no);
    if (!std::isfinite(v)) throw parse_error("nonfinite value", line_no);
    if (!seen.emplace(i, j).second)
      throw parse_error("duplicate entry", line_no);
    ts.emplace_back(i - 1, j - 1, v);
  }
  if (n == 0) {
    if (!ts.empty()) throw parse_error("entries in a 0-dimensional matrix", 1);
    return SymSparse();
  }
  return SymSparse::from_triplets(n, ts);
}

SymSparse read_coo(const std::string& text, int n) {
  std::istringstream ss(text);
  return read_coo(ss, n);
}

std::string scale_meta_json(const ScaledStructure& s) {
  nlohmann::json j;
  j["n_regions"] = s.n;
  j["n_structured"] = s.n_structured();
  j["n_components"] = s.n_components;
  j["rank_deficiency"] = s.rank_deficiency;
  j["scale_factors"] = s.scale_factors;
  j["structured_regions"] = s.structured_regions;
  j["singleton_regions"] = s.singleton_regions;
  j["index_base"] = 0;
  return j.dump(2) + "\n";
}

std::string fit_result_json(const FitResult& fr) {
  nlohmann::json j;
  j["model"] = to_string(fr.kind);
  j["n_regions"] = fr.eta_mean.size();

  nlohmann::json sm;
  sm["intercept"] = summary_json(fr.intercept);
  sm["beta"] = nlohmann::json::array();
  for (const SummaryStats& b : fr.beta) sm["beta"].push_back(summary_json(b));
  sm["hyper"] = nlohmann::json::array();
  for (const SummaryStats& h : fr.hyper) sm["hyper"].push_back(summary_json(h));
  j["summaries"] = sm;

  j["eta"] = {{"mean", vector_json(fr.eta_mean)}, {"sd", vector_json(fr.eta_sd)}};
  j["risk"] = {{"mean", vector_json(fr.risk_mean)},
               {"sd", vector_json(fr.risk_sd)}};

  const Diagnostics& dg = fr.diagnostics;
  j["diagnostics"] = {{"mean_deviance", dg.mean_deviance},
                      {"deviance_at_mean", dg.deviance_at_mean},
                      {"p_d", dg.p_d},
                      {"dic", dg.dic},
                      {"dic_focus", dg.dic_focus},
                      {"cpo", vector_json(dg.cpo)},
                      {"cpo_unstable", dg.cpo_unstable},
                      {"log_score", dg.log_score},
                      {"rmse", dg.rmse}};

  nlohmann::json grid;
  grid["size"] = fr.grid_size;
  grid["evaluated_points"] = fr.evaluated_points;
  grid["failed_points"] = fr.failed_points;
  grid["truncated"] = fr.truncated;
  grid["theta_mode_internal"] = vector_json(fr.theta_mode);
  grid["log_post_mode"] = fr.log_post_mode;
  grid["max_grad_norm"] = fr.max_grad_norm;
  grid["nm_evaluations"] = fr.nm_evaluations;
  grid["newton_iterations_total"] = fr.newton_iterations_total;
  grid["hyper_mode_note"] = fr.hyper_mode_note;
  grid["points"] = nlohmann::json::array();
  for (const GridPoint& p : fr.grid) {
    grid["points"].push_back({{"theta_user", vector_json(p.theta_user)},
                              {"log_post", p.log_post},
                              {"weight", p.weight}});
  }
  j["grid"] = grid;
  return j.dump(2) + "\n";
}

std::string fit_summary_table(const FitResult& fr) {
  std::string out;
  char head[128];
  std::snprintf(head, sizeof head, "%-14s %10s %10s %10s %10s %10s %10s\n",
                "parameter", "Mean", "SD", "2.5%", "Median", "97.5%", "Mode");
  out += head;
  append_table_row(out, "mu", fr.intercept);
  for (size_t i = 0; i < fr.beta.size(); ++i) {
    append_table_row(out, fr.beta[i].name, fr.beta[i]);
  }
  for (const SummaryStats& h : fr.hyper) append_table_row(out, h.name, h);
  return out;
}

std::string risk_table_csv(const FitResult& fr, const Dataset& data) {
  if (static_cast<Eigen::Index>(data.n()) != fr.eta_mean.size())
    throw error("risk_table_csv: dataset does not match the fit");
  std::string out =
      "region,y,e,smr,eta_mean,eta_sd,risk_mean,risk_sd,cpo,cpo_unstable\n";
  char buf[256];
  for (Eigen::Index i = 0; i < fr.eta_mean.size(); ++i) {
    std::snprintf(buf, sizeof buf,
                  "%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n",
                  static_cast<long>(i + 1), data.y(i), data.e(i),
                  data.y(i) / data.e(i), fr.eta_mean(i), fr.eta_sd(i),
                  fr.risk_mean(i), fr.risk_sd(i), fr.diagnostics.cpo(i),
                  fr.diagnostics.cpo_unstable[static_cast<size_t>(i)]);
    out += buf;
  }
  return out;
}

}  // namespace bym2
