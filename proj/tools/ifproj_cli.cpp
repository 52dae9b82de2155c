// Batch front end: d-separation queries, constraint derivation from a DAG,
// sensitivity-curve estimation, bias bounds, and the simulation harness.
// Exit codes: 0 success, 1 estimation failure, 2 configuration error.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ifproj/config.hpp"
#include "ifproj/data.hpp"
#include "ifproj/errors.hpp"
#include "ifproj/graph.hpp"
#include "ifproj/mc.hpp"
#include "ifproj/ovb.hpp"
#include "ifproj/sens.hpp"

namespace {

using nlohmann::json;

constexpr double kZ975 = 1.959963984540054;

std::vector<double> parse_grid(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ifproj::ParseError(std::string(what) + ": cannot parse number '" + tok + "'");
    }
  }
  if (out.empty()) throw ifproj::ParseError(std::string(what) + ": empty grid");
  return out;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = tok.find_last_not_of(" \t");
    out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ifproj::Error("cannot open for writing: " + path.string());
  f << content;
  if (!f) throw ifproj::Error("write failed: " + path.string());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// flag-over-config resolution: an explicitly passed flag wins, then the
// config file, then the built-in default already stored in `value`
template <typename T>
void resolve(const CLI::Option* opt, const ifproj::Config& cfg, const std::string& key, T& value) {
  if (opt != nullptr && opt->count() > 0) return;
  if (!cfg.has(key)) return;
  if constexpr (std::is_same_v<T, std::string>)
    value = cfg.get_string(key);
  else if constexpr (std::is_same_v<T, bool>)
    value = cfg.get_bool(key, value);
  else
    value = static_cast<T>(cfg.get_number(key));
}

struct EstimateOpts {
  std::string config_path, data, schema, gamma_text, constraints_path, out_dir = ".";
  int k = 5, max_sweeps = ifproj::kDefaultMaxSweeps, jobs = 1;
  std::uint64_t seed = 0;
  double eps = ifproj::kDefaultProjectionEps;
  bool in_fold = false;
};

struct OvbOpts {
  std::string config_path, data, schema, eta2_text, constraints_path, out_dir = ".";
  int k = 5, max_sweeps = ifproj::kDefaultMaxSweeps, jobs = 1;
  std::uint64_t seed = 0;
  double rho = 1.0, eps = ifproj::kDefaultProjectionEps;
  bool in_fold = false;
};

struct SimulateOpts {
  std::string config_path, spec = "example1", gamma_text, eta2_text, constraints_path,
              table_format = "csv", out_dir = ".";
  int n = -1, reps = -1, k = 5, max_sweeps = -1, jobs = 1;
  std::uint64_t seed = 0;
  double rho = 1.0, eps = ifproj::kDefaultProjectionEps;
  bool no_projection = false;
};

ifproj::Config load_config_or_empty(const std::string& path) {
  if (path.empty()) return ifproj::Config::parse("");
  return ifproj::Config::load(path);
}

ifproj::Dataset load_input(const std::string& data, const std::string& schema_path,
                           bool binary_outcome, int k, std::vector<std::string>& warnings) {
  if (data.empty()) throw ifproj::ParseError("--data is required (flag or config)");
  if (schema_path.empty()) throw ifproj::ParseError("--schema is required (flag or config)");
  const ifproj::Schema schema = ifproj::load_schema(schema_path);
  ifproj::Dataset ds = ifproj::load_csv(data, schema);
  std::string errors;
  for (const auto& issue : ifproj::validate_dataset(ds, binary_outcome, k)) {
    if (issue.severity == ifproj::ValidationIssue::Severity::error)
      errors += (errors.empty() ? "" : "; ") + issue.message;
    else
      warnings.push_back(issue.message);
  }
  if (!errors.empty()) throw ifproj::DomainError("dataset validation failed: " + errors);
  return ds;
}

json constraint_list_json(const std::vector<ifproj::CiConstraint>& cs,
                          const std::vector<std::string>& names) {
  json arr = json::array();
  for (const auto& c : cs) arr.push_back(ifproj::format_constraint(c, names));
  return arr;
}

int cmd_estimate(const EstimateOpts& o) {
  std::vector<std::string> warnings;
  ifproj::Dataset ds = load_input(o.data, o.schema, /*binary_outcome=*/true, o.k, warnings);

  std::vector<double> gammas =
      o.gamma_text.empty() ? std::vector<double>{-4, -2, 0, 2, 4} : parse_grid(o.gamma_text, "--gamma");

  ifproj::ProjectionSpec pspec;
  pspec.cond = ifproj::default_cond_mean_config();
  pspec.eps = o.eps;
  pspec.max_sweeps = o.max_sweeps;
  pspec.fit_in_fold = o.in_fold;
  if (!o.constraints_path.empty())
    pspec.constraints = ifproj::load_constraints(o.constraints_path, ds.names);
  if (o.eps <= 0) throw ifproj::DomainError("--eps must be > 0");
  if (o.k < 2) throw ifproj::DomainError("--k must be >= 2");

  const std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);

  const auto t0 = std::chrono::steady_clock::now();
  const ifproj::SensitivityCurve curve = ifproj::cross_fit_curve(
      ds, gammas, o.k, ifproj::default_nuisance_config(), pspec, o.seed, o.jobs);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::string csv = "gamma,est,var,ci_lo,ci_hi,projected\n";
  json points = json::array();
  for (const auto& pt : curve.points) {
    const double half = kZ975 * std::sqrt(pt.var_tau);
    csv += fmt(pt.gamma) + "," + fmt(pt.tau) + "," + fmt(pt.var_tau) + "," +
           fmt(pt.tau - half) + "," + fmt(pt.tau + half) + "," + (pt.projected ? "1" : "0") +
           "\n";
    points.push_back({{"gamma", pt.gamma},
                      {"projected", pt.projected},
                      {"psi1", pt.psi1},
                      {"psi0", pt.psi0},
                      {"tau", pt.tau},
                      {"var1", pt.var1},
                      {"var0", pt.var0},
                      {"var_tau", pt.var_tau},
                      {"ci_lo", pt.tau - half},
                      {"ci_hi", pt.tau + half},
                      {"converged", pt.converged},
                      {"max_sweeps_used", pt.max_sweeps_used}});
  }
  write_text(dir / "curve.csv", csv);

  json summary = {{"command", "estimate"},
                  {"data", o.data},
                  {"schema", o.schema},
                  {"n", curve.n},
                  {"k_folds", curve.k_folds},
                  {"seed", o.seed},
                  {"gammas", gammas},
                  {"constraints", constraint_list_json(pspec.constraints, ds.names)},
                  {"eps", pspec.eps},
                  {"max_sweeps", pspec.max_sweeps},
                  {"fit_in_fold", pspec.fit_in_fold},
                  {"points", points},
                  {"warnings", warnings},
                  {"outputs", {(dir / "curve.csv").string()}}};
  write_text(dir / "curve.json", summary.dump(2) + "\n");
  std::cerr << "estimate: wall " << wall << "s\n";
  std::cout << (dir / "curve.csv").string() << "\n";
  return 0;
}

int cmd_ovb(const OvbOpts& o) {
  std::vector<std::string> warnings;
  ifproj::Dataset ds = load_input(o.data, o.schema, /*binary_outcome=*/false, o.k, warnings);

  std::vector<double> eta2s = o.eta2_text.empty()
                                  ? std::vector<double>{0.01, 0.05, 0.1, 0.2, 0.25}
                                  : parse_grid(o.eta2_text, "--eta2");
  for (double e : eta2s)
    if (!(e >= 0.0 && e < 1.0)) throw ifproj::DomainError("--eta2 values must lie in [0, 1)");
  if (o.k < 2) throw ifproj::DomainError("--k must be >= 2");

  ifproj::OvbConfig ocfg = ifproj::default_ovb_config();
  ocfg.k_folds = o.k;

  ifproj::ProjectionSpec pspec;
  pspec.cond = ifproj::default_cond_mean_config();
  pspec.eps = o.eps;
  pspec.max_sweeps = o.max_sweeps;
  pspec.fit_in_fold = o.in_fold;
  if (!o.constraints_path.empty())
    pspec.constraints = ifproj::load_constraints(o.constraints_path, ds.names);

  const std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);

  const auto t0 = std::chrono::steady_clock::now();
  const ifproj::OvbShortFit fit = ifproj::ovb_short_fit(ds, ocfg, o.seed, o.jobs);
  std::vector<ifproj::OvbBoundRow> rows;
  for (double e : eta2s) rows.push_back(ifproj::ovb_bounds(fit, e, e, o.rho));
  std::optional<ifproj::OvbProjection> prj;
  if (!pspec.constraints.empty()) {
    prj = ifproj::ovb_project(ds, fit, pspec, o.seed, o.jobs);
    for (double e : eta2s) rows.push_back(ifproj::ovb_bounds_projected(fit, *prj, e, e, o.rho));
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::string csv = "eta2,rho,tau_lo,tau_hi,var_lo,var_hi,projected\n";
  json row_json = json::array();
  for (const auto& r : rows) {
    csv += fmt(r.eta2_y) + "," + fmt(r.rho) + "," + fmt(r.tau_lo) + "," + fmt(r.tau_hi) + "," +
           fmt(r.var_lo) + "," + fmt(r.var_hi) + "," + (r.projected ? "1" : "0") + "\n";
    row_json.push_back({{"eta2", r.eta2_y},
                        {"rho", r.rho},
                        {"projected", r.projected},
                        {"tau", r.tau},
                        {"tau_lo", r.tau_lo},
                        {"tau_hi", r.tau_hi},
                        {"var_lo", r.var_lo},
                        {"var_hi", r.var_hi},
                        {"half_width", r.half}});
  }
  write_text(dir / "bounds.csv", csv);

  json summary = {{"command", "ovb"},
                  {"data", o.data},
                  {"schema", o.schema},
                  {"n", fit.n},
                  {"k_folds", fit.k_folds},
                  {"seed", o.seed},
                  {"rho", o.rho},
                  {"eta2s", eta2s},
                  {"constraints", constraint_list_json(pspec.constraints, ds.names)},
                  {"short_fit",
                   {{"tau", fit.tau},
                    {"sigma2", fit.sigma2},
                    {"nu2", fit.nu2},
                    {"var_tau", fit.var_tau}}},
                  {"rows", row_json},
                  {"warnings", warnings},
                  {"outputs", {(dir / "bounds.csv").string()}}};
  if (prj) {
    summary["projected_fit"] = {{"tau", prj->tau},
                                {"sigma2", prj->sigma2},
                                {"nu2", prj->nu2},
                                {"converged", prj->converged}};
  }
  write_text(dir / "bounds.json", summary.dump(2) + "\n");
  std::cerr << "ovb: wall " << wall << "s\n";
  std::cout << (dir / "bounds.csv").string() << "\n";
  return 0;
}

int cmd_simulate(const SimulateOpts& o) {
  const ifproj::McKind kind = ifproj::parse_mc_kind(o.spec);
  ifproj::McConfig cfg = ifproj::default_mc_config(kind);
  if (o.n > 0) cfg.n = o.n;
  if (o.reps > 0) cfg.reps = o.reps;
  cfg.k_folds = o.k;
  cfg.seed = o.seed;
  cfg.jobs = o.jobs;
  cfg.rho = o.rho;
  cfg.eps = o.eps;
  if (o.max_sweeps > 0) cfg.max_sweeps = o.max_sweeps;
  cfg.with_projection = !o.no_projection;
  if (!o.gamma_text.empty()) cfg.gammas = parse_grid(o.gamma_text, "--gamma");
  if (!o.eta2_text.empty()) cfg.eta2s = parse_grid(o.eta2_text, "--eta2");
  for (double e : cfg.eta2s)
    if (!(e >= 0.0 && e < 1.0)) throw ifproj::DomainError("--eta2 values must lie in [0, 1)");
  if (!o.constraints_path.empty()) {
    const ifproj::McDraw probe = ifproj::mc_generate(kind, 10, 0);
    cfg.constraints = ifproj::load_constraints(o.constraints_path, probe.data.names);
  }
  if (o.table_format != "csv" && o.table_format != "markdown")
    throw ifproj::ParseError("--table must be csv or markdown");

  const std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);

  const ifproj::McReport report = ifproj::run_mc(cfg);

  const std::filesystem::path table_path =
      dir / (o.table_format == "csv" ? "table.csv" : "table.md");
  write_text(table_path,
             o.table_format == "csv" ? ifproj::table_csv(report) : ifproj::table_markdown(report));

  // wall time goes to stderr only: the written artifacts are byte-identical
  // across reruns and across --jobs for a fixed seed
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"kind", r.kind},
                    {"n", r.n},
                    {"param", r.param},
                    {"variant", r.variant},
                    {"mean_estimate", r.mean_est},
                    {"mean_variance", r.mean_var},
                    {"mc_variance", r.mc_var},
                    {"reps", r.reps_ok}});
  json summary = {{"command", "simulate"},
                  {"spec", ifproj::mc_kind_name(kind)},
                  {"n", cfg.n},
                  {"reps", cfg.reps},
                  {"k_folds", cfg.k_folds},
                  {"seed", cfg.seed},
                  {"with_projection", cfg.with_projection},
                  {"eps", cfg.eps},
                  {"max_sweeps", cfg.max_sweeps},
                  {"rows", rows},
                  {"failures", report.failures},
                  {"failure_notes", report.failure_notes},
                  {"valid", report.valid},
                  {"sweeps_max", report.sweeps_max},
                  {"outputs", {table_path.string()}}};
  if (kind == ifproj::McKind::ovb) {
    summary["eta2s"] = cfg.eta2s;
    summary["rho"] = cfg.rho;
  } else {
    summary["gammas"] = cfg.gammas;
  }
  write_text(dir / "simulate.json", summary.dump(2) + "\n");

  std::cerr << "simulate: " << report.rows.size() << " rows, " << report.failures
            << " failed replication(s), wall " << report.wall_seconds << "s\n";
  std::cout << table_path.string() << "\n";
  if (!report.valid) {
    std::cerr << "simulate: run invalid (" << report.failures << "/" << cfg.reps
              << " replications failed)\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"influence-function projection toolkit"};
  app.require_subcommand(1);

  // dsep
  auto* dsep = app.add_subcommand("dsep", "query d-separation in a DAG file");
  std::string ds_dag, ds_x, ds_y, ds_given;
  dsep->add_option("--dag", ds_dag, "DAG edge-list file")->required();
  dsep->add_option("--x", ds_x, "first vertex")->required();
  dsep->add_option("--y", ds_y, "second vertex")->required();
  dsep->add_option("--given", ds_given, "conditioning vertices, comma separated");

  // constraints
  auto* cons = app.add_subcommand("constraints", "derive CI constraints implied by a DAG");
  std::string co_dag, co_cov, co_out;
  int co_max_cond = 1;
  cons->add_option("--dag", co_dag, "DAG edge-list file")->required();
  cons->add_option("--covariates", co_cov, "covariate names, comma separated")->required();
  cons->add_option("--max-cond", co_max_cond, "largest conditioning-set size");
  cons->add_option("--out", co_out, "output file (default: stdout)");

  // estimate
  EstimateOpts eo;
  auto* est = app.add_subcommand("estimate", "sensitivity curve from a CSV dataset");
  auto* e_cfg = est->add_option("--config", eo.config_path, "TOML config file");
  auto* e_data = est->add_option("--data", eo.data, "CSV dataset");
  auto* e_schema = est->add_option("--schema", eo.schema, "schema TOML (column roles)");
  auto* e_gamma = est->add_option("--gamma", eo.gamma_text, "comma-separated tilt grid");
  auto* e_consf = est->add_option("--constraints", eo.constraints_path, "constraint file");
  auto* e_k = est->add_option("--k", eo.k, "cross-fitting folds");
  auto* e_seed = est->add_option("--seed", eo.seed, "master seed");
  auto* e_eps = est->add_option("--eps", eo.eps, "projection sweep tolerance");
  auto* e_ms = est->add_option("--max-sweeps", eo.max_sweeps, "projection sweep cap");
  auto* e_if = est->add_flag("--in-fold", eo.in_fold, "fit projection smoothers on the held-out fold");
  auto* e_out = est->add_option("--out-dir", eo.out_dir, "output directory");
  auto* e_jobs = est->add_option("--jobs", eo.jobs, "worker count");

  // ovb
  OvbOpts oo;
  auto* ovb = app.add_subcommand("ovb", "omitted-variable-bias bounds from a CSV dataset");
  auto* o_cfg = ovb->add_option("--config", oo.config_path, "TOML config file");
  auto* o_data = ovb->add_option("--data", oo.data, "CSV dataset");
  auto* o_schema = ovb->add_option("--schema", oo.schema, "schema TOML (column roles)");
  auto* o_eta = ovb->add_option("--eta2", oo.eta2_text, "comma-separated sensitivity grid");
  auto* o_rho = ovb->add_option("--rho", oo.rho, "confounding correlation in [-1, 1]");
  auto* o_consf = ovb->add_option("--constraints", oo.constraints_path, "constraint file");
  auto* o_k = ovb->add_option("--k", oo.k, "cross-fitting folds");
  auto* o_seed = ovb->add_option("--seed", oo.seed, "master seed");
  auto* o_eps = ovb->add_option("--eps", oo.eps, "projection sweep tolerance");
  auto* o_ms = ovb->add_option("--max-sweeps", oo.max_sweeps, "projection sweep cap");
  auto* o_if = ovb->add_flag("--in-fold", oo.in_fold, "fit projection smoothers on the held-out fold");
  auto* o_out = ovb->add_option("--out-dir", oo.out_dir, "output directory");
  auto* o_jobs = ovb->add_option("--jobs", oo.jobs, "worker count");

  // simulate
  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "seeded Monte Carlo experiments");
  auto* s_cfg = sim->add_option("--config", so.config_path, "TOML config file");
  auto* s_spec = sim->add_option("--spec", so.spec, "example1|example2|misspec|ovb");
  auto* s_n = sim->add_option("--n", so.n, "units per replication");
  auto* s_reps = sim->add_option("--reps", so.reps, "replication count");
  auto* s_k = sim->add_option("--k", so.k, "cross-fitting folds");
  auto* s_seed = sim->add_option("--seed", so.seed, "master seed");
  auto* s_gamma = sim->add_option("--gamma", so.gamma_text, "comma-separated tilt grid");
  auto* s_eta = sim->add_option("--eta2", so.eta2_text, "comma-separated sensitivity grid");
  auto* s_rho = sim->add_option("--rho", so.rho, "confounding correlation");
  auto* s_eps = sim->add_option("--eps", so.eps, "projection sweep tolerance");
  auto* s_ms = sim->add_option("--max-sweeps", so.max_sweeps, "projection sweep cap");
  auto* s_consf = sim->add_option("--constraints", so.constraints_path, "constraint file override");
  auto* s_noprj = sim->add_flag("--no-projection", so.no_projection, "skip the projected variant");
  auto* s_table = sim->add_option("--table", so.table_format, "csv|markdown");
  auto* s_out = sim->add_option("--out-dir", so.out_dir, "output directory");
  auto* s_jobs = sim->add_option("--jobs", so.jobs, "worker count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (dsep->parsed()) {
      const ifproj::Dag g = ifproj::load_dag(ds_dag);
      std::vector<int> given;
      for (const auto& name : parse_names(ds_given)) given.push_back(g.index_of(name));
      const bool sep = ifproj::d_separated(g, g.index_of(ds_x), g.index_of(ds_y), given);
      std::cout << (sep ? "true" : "false") << "\n";
      return 0;
    }
    if (cons->parsed()) {
      const ifproj::Dag g = ifproj::load_dag(co_dag);
      const std::vector<std::string> covs = parse_names(co_cov);
      if (covs.empty()) throw ifproj::ParseError("--covariates: no names given");
      if (co_max_cond < 0) throw ifproj::DomainError("--max-cond must be >= 0");
      const auto cs = ifproj::implied_constraints(g, covs, co_max_cond);
      const std::string text = ifproj::format_constraints(cs, covs);
      if (co_out.empty())
        std::cout << text;
      else
        write_text(co_out, text);
      return 0;
    }
    if (est->parsed()) {
      const ifproj::Config cfg = load_config_or_empty(eo.config_path);
      resolve(e_data, cfg, "data", eo.data);
      resolve(e_schema, cfg, "schema", eo.schema);
      resolve(e_consf, cfg, "constraints", eo.constraints_path);
      resolve(e_k, cfg, "k", eo.k);
      resolve(e_seed, cfg, "seed", eo.seed);
      resolve(e_eps, cfg, "eps", eo.eps);
      resolve(e_ms, cfg, "max_sweeps", eo.max_sweeps);
      resolve(e_if, cfg, "in_fold", eo.in_fold);
      resolve(e_out, cfg, "out_dir", eo.out_dir);
      resolve(e_jobs, cfg, "jobs", eo.jobs);
      if (e_gamma->count() == 0 && cfg.has("gamma")) {
        eo.gamma_text.clear();
        for (double g : cfg.get_numbers("gamma"))
          eo.gamma_text += (eo.gamma_text.empty() ? "" : ",") + fmt(g);
      }
      return cmd_estimate(eo);
    }
    if (ovb->parsed()) {
      const ifproj::Config cfg = load_config_or_empty(oo.config_path);
      resolve(o_data, cfg, "data", oo.data);
      resolve(o_schema, cfg, "schema", oo.schema);
      resolve(o_consf, cfg, "constraints", oo.constraints_path);
      resolve(o_k, cfg, "k", oo.k);
      resolve(o_seed, cfg, "seed", oo.seed);
      resolve(o_rho, cfg, "rho", oo.rho);
      resolve(o_eps, cfg, "eps", oo.eps);
      resolve(o_ms, cfg, "max_sweeps", oo.max_sweeps);
      resolve(o_if, cfg, "in_fold", oo.in_fold);
      resolve(o_out, cfg, "out_dir", oo.out_dir);
      resolve(o_jobs, cfg, "jobs", oo.jobs);
      if (o_eta->count() == 0 && cfg.has("eta2")) {
        oo.eta2_text.clear();
        for (double e : cfg.get_numbers("eta2"))
          oo.eta2_text += (oo.eta2_text.empty() ? "" : ",") + fmt(e);
      }
      return cmd_ovb(oo);
    }
    if (sim->parsed()) {
      const ifproj::Config cfg = load_config_or_empty(so.config_path);
      resolve(s_spec, cfg, "spec", so.spec);
      resolve(s_n, cfg, "n", so.n);
      resolve(s_reps, cfg, "reps", so.reps);
      resolve(s_k, cfg, "k", so.k);
      resolve(s_seed, cfg, "seed", so.seed);
      resolve(s_rho, cfg, "rho", so.rho);
      resolve(s_eps, cfg, "eps", so.eps);
      resolve(s_ms, cfg, "max_sweeps", so.max_sweeps);
      resolve(s_consf, cfg, "constraints", so.constraints_path);
      resolve(s_noprj, cfg, "no_projection", so.no_projection);
      resolve(s_table, cfg, "table", so.table_format);
      resolve(s_out, cfg, "out_dir", so.out_dir);
      resolve(s_jobs, cfg, "jobs", so.jobs);
      if (s_gamma->count() == 0 && cfg.has("gamma")) {
        so.gamma_text.clear();
        for (double g : cfg.get_numbers("gamma"))
          so.gamma_text += (so.gamma_text.empty() ? "" : ",") + fmt(g);
      }
      if (s_eta->count() == 0 && cfg.has("eta2")) {
        so.eta2_text.clear();
        for (double e : cfg.get_numbers("eta2"))
          so.eta2_text += (so.eta2_text.empty() ? "" : ",") + fmt(e);
      }
      return cmd_simulate(so);
    }
  } catch (const ifproj::EstimationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ifproj::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
