#ifndef IFPROJ_SENS_HPP
#define IFPROJ_SENS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ifproj/data.hpp"
#include "ifproj/learners.hpp"
#include "ifproj/project.hpp"

namespace ifproj {

// exponential-tilt scale: beyond this the tilted odds are numerically
// degenerate (e^20 ~ 5e8) and requests are rejected rather than silently clipped
inline constexpr double kMaxTiltGamma = 20.0;
inline constexpr double kPropensityTruncLo = 0.01;
inline constexpr double kPropensityTruncHi = 0.99;

// Moments of the tilted binary outcome law with mean mu:
// m0 = E[e^{gY}] = mu e^g + (1-mu),  m1 = E[Y e^{gY}] = mu e^g.
struct TiltedMoments {
  double m0 = 1.0;
  double m1 = 0.0;
};
TiltedMoments tilted_moments(double mu, double gamma);

// m1/m0 = mu / (mu + (1-mu) e^{-g}); this form stays finite over the whole
// admissible gamma range and is monotone in both arguments
double tilt_ratio(double mu, double gamma);

// e^{gy}/m0 for y in {0,1}
double tilt_weight(double y, double mu, double gamma);

struct NuisanceConfig {
  EnsembleConfig propensity;
  EnsembleConfig outcome;
  double trunc_lo = kPropensityTruncLo;
  double trunc_hi = kPropensityTruncHi;
};
NuisanceConfig default_nuisance_config();

struct NuisanceFit {
  Ensemble propensity;  // P(T=1 | X)
  Ensemble outcome1;    // E[Y | T=1, X]
  Ensemble outcome0;    // E[Y | T=0, X]
  double trunc_lo = kPropensityTruncLo;
  double trunc_hi = kPropensityTruncHi;
};

// outcome models are fit separately per arm; requires a 0/1 outcome
NuisanceFit fit_nuisances(const Dataset& train, const NuisanceConfig& cfg, std::uint64_t seed);

struct NuisancePred {
  Eigen::VectorXd pi1;  // truncated into [trunc_lo, trunc_hi]
  Eigen::VectorXd mu1;
  Eigen::VectorXd mu0;
};
NuisancePred predict_nuisances(const NuisanceFit& f, const Eigen::MatrixXd& x);

// plug-in value of the tilted mean-counterfactual for one arm:
// mean_x{ mu_t pi_t + r_t pi_{1-t} }
double plugin_psi(const NuisancePred& np, double gamma, int arm);

// Uncentered per-unit influence contributions for both arms; the one-step
// estimate of psi_t is the plain mean of the matching column, and centering at
// that mean gives the efficient influence values.
struct EifPair {
  Eigen::VectorXd phi1;
  Eigen::VectorXd phi0;
};
EifPair eif_values_uncentered(const Eigen::VectorXi& t, const Eigen::VectorXd& y,
                              const NuisancePred& np, double gamma);

struct FoldEstimate {
  double psi1 = 0.0, psi0 = 0.0, tau = 0.0;
  double var1 = 0.0, var0 = 0.0, var_tau = 0.0;  // sample variance / n
};
FoldEstimate fold_estimate(const EifPair& e);

struct ProjectionSpec {
  std::vector<CiConstraint> constraints;  // empty -> no projected variant
  CondMeanConfig cond;
  double eps = kDefaultProjectionEps;
  int max_sweeps = kDefaultMaxSweeps;
  // Conditional-mean models are fitted on the training folds and applied to the
  // held-out fold by default; fit_in_fold fits them on the held-out fold itself.
  bool fit_in_fold = false;
};

struct CurvePoint {
  double gamma = 0.0;
  bool projected = false;
  double psi1 = 0.0, psi0 = 0.0, tau = 0.0;
  double var1 = 0.0, var0 = 0.0, var_tau = 0.0;
  bool converged = true;     // every fold's alternating projection converged
  int max_sweeps_used = 0;   // worst fold
};

struct FoldDetail {
  int fold = 0;
  double gamma = 0.0;
  bool projected = false;
  FoldEstimate est;
  int sweeps = 0;
  bool converged = true;
};

struct SensitivityCurve {
  std::vector<CurvePoint> points;   // one per (gamma, variant)
  std::vector<FoldDetail> folds;
  int n = 0;
  int k_folds = 0;
};

// Cross-fit one-step estimates over a tilt grid. Per fold, nuisances are fit
// on the complement and the fold supplies the evaluation sample; fold
// estimates and their variances are aggregated by the median. When constraints
// are given, the uncentered influence values of each arm are projected with
// conditional means fit on the training rows and the projected variant is
// reported alongside. Deterministic for fixed seed, independent of jobs.
SensitivityCurve cross_fit_curve(const Dataset& ds, const std::vector<double>& gammas,
                                 int k_folds, const NuisanceConfig& ncfg,
                                 const ProjectionSpec& pspec, std::uint64_t seed, int jobs = 1);

}  // namespace ifproj

#endif
