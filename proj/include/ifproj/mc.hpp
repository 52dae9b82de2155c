#ifndef IFPROJ_MC_HPP
#define IFPROJ_MC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ifproj/data.hpp"
#include "ifproj/ovb.hpp"
#include "ifproj/sens.hpp"

namespace ifproj {

enum class McKind { example1, example2, misspec, ovb };

McKind parse_mc_kind(const std::string& s);
std::string mc_kind_name(McKind kind);

// diagnostics kept out of the Dataset handed to estimators: the latent
// confounder and the realized linear predictors
struct McTruth {
  Eigen::VectorXd u;
  Eigen::VectorXd lin_t;  // logit of P(T=1 | X, U)
  Eigen::VectorXd lin_y;  // logit of P(Y=1 | X, U, T), or E[Y | X, U, T] for the
                          // continuous-outcome kind
};

struct McDraw {
  Dataset data;
  McTruth truth;
};

// one synthetic draw; covariates x1..x4, treatment t, outcome y. Column order
// of random draws is fixed, so a (kind, n, seed) triple pins the dataset.
McDraw mc_generate(McKind kind, int n, std::uint64_t seed);

// the independence constraints each experiment projects onto; for the
// misspecified kind these are deliberately wrong for its data
std::vector<CiConstraint> builtin_constraints(McKind kind);

struct McConfig {
  McKind kind = McKind::example1;
  int n = 1000;
  int reps = 100;
  int k_folds = 5;
  std::vector<double> gammas = {-4.0, -2.0, 0.0, 2.0, 4.0};   // tilt kinds
  std::vector<double> eta2s = {0.01, 0.05, 0.1, 0.2, 0.25};   // ovb kind
  double rho = 1.0;
  NuisanceConfig nuisance;
  OvbConfig ovb;
  CondMeanConfig cond;
  std::vector<CiConstraint> constraints;  // empty -> builtin for the kind
  bool with_projection = true;
  bool project_in_fold = false;  // fit projection conditional means on the held-out fold
  double eps = kDefaultProjectionEps;
  int max_sweeps = kDefaultMaxSweeps;
  std::uint64_t seed = 0;
  int jobs = 1;
  double max_failure_rate = 0.10;
};

// per-kind defaults: sample size, grids, and the single-sweep shortcut for the
// ovb experiment (its constraint set factorizes, one sweep is exact there)
McConfig default_mc_config(McKind kind);

struct McRow {
  std::string kind;
  int n = 0;
  double param = 0.0;    // gamma, or eta2 for the ovb kind
  std::string variant;   // nonparametric | projected, with :lo/:hi for bounds
  double mean_est = 0.0;
  double mean_var = 0.0;  // mean of per-rep variance estimates
  double mc_var = 0.0;    // across-rep variance of the estimates (diagnostic)
  int reps_ok = 0;
};

struct McReport {
  std::vector<McRow> rows;
  int reps_requested = 0;
  int failures = 0;
  std::vector<std::string> failure_notes;
  bool valid = true;
  int sweeps_max = 0;
  bool any_multi_sweep = false;
  double wall_seconds = 0.0;  // measurement; excluded from csv/markdown output
};

// Replications run concurrently; every random stream is keyed by (seed, rep),
// each rep writes only its own slots, and the reduce walks reps in order, so
// the report is bit-identical for any jobs value. A rep that throws is
// recorded and excluded; more than max_failure_rate of them marks the report
// invalid.
McReport run_mc(const McConfig& cfg);

// stable column order; estimates at 4 significant digits, variances at 4
// decimals. Wall time never appears here (it would break reproducibility).
std::string table_csv(const McReport& rep);
std::string table_markdown(const McReport& rep);

std::string fmt_sig(double v, int digits);
std::string fmt_fixed(double v, int decimals);

}  // namespace ifproj

#endif
