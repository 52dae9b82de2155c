#ifndef IFPROJ_OVB_HPP
#define IFPROJ_OVB_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ifproj/data.hpp"
#include "ifproj/learners.hpp"
#include "ifproj/sens.hpp"

namespace ifproj {

// E[alpha^2] = E[1/(pi(1-pi))] >= 4 for any propensity; an estimate below the
// floor signals a propensity fit too degenerate to support the bias bound
inline constexpr double kRieszSecondMomentFloor = 4.0;

// mean-contrast Riesz representer T/pi - (1-T)/(1-pi)
Eigen::VectorXd riesz_ate(const Eigen::VectorXi& t, const Eigen::VectorXd& pi);

// Short-model statistics on one evaluation sample with fixed nuisance values:
// tau is the doubly robust contrast, sigma2 the outcome-residual second
// moment, nu2 the representer second moment. Influence values are centered at
// the sample points (if_tau exactly, the others up to estimation of pi/mu).
struct OvbStats {
  double tau = 0.0;
  double sigma2 = 0.0;
  double nu2 = 0.0;
  Eigen::VectorXd if_tau;
  Eigen::VectorXd if_sigma2;
  Eigen::VectorXd if_nu2;
};
OvbStats ovb_stats(const Eigen::VectorXi& t, const Eigen::VectorXd& y, const Eigen::VectorXd& pi,
                   const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu0);

struct OvbConfig {
  EnsembleConfig propensity;  // probability task
  EnsembleConfig outcome;     // regression task, one model per arm
  double trunc_lo = kPropensityTruncLo;
  double trunc_hi = kPropensityTruncHi;
  int k_folds = 5;
};
OvbConfig default_ovb_config();

struct OvbFoldData {
  int fold = 0;
  std::vector<int> eval_rows;
  // nuisance predictions on every unit, so influence values can be rebuilt on
  // training rows later (projection fits its conditional means there)
  Eigen::VectorXd pi_all, mu1_all, mu0_all;
  OvbStats stats;  // on eval_rows
};

struct OvbShortFit {
  std::vector<OvbFoldData> folds;
  std::vector<int> fold_of;  // per original row, 1..k
  // cross-fitted per-unit values, each taken from the unit's own eval fold
  Eigen::VectorXd pi, mu1, mu0, alpha;
  double tau = 0.0, sigma2 = 0.0, nu2 = 0.0;  // medians over folds
  double var_tau = 0.0;                       // median of per-fold var(if_tau)/n_k
  int n = 0;
  int k_folds = 0;
};

// cross-fit short-model fit; throws EstimationError when the aggregated
// representer second moment falls below its theoretical floor
OvbShortFit ovb_short_fit(const Dataset& ds, const OvbConfig& cfg, std::uint64_t seed,
                          int jobs = 1);

// Projected variant: the three influence-value vectors are each pushed through
// the alternating projection (fit on training rows, applied to the fold), and
// every point estimate is recomputed as fold point + mean of its projected
// influence values. An empty constraint list reproduces the unprojected fit.
struct OvbProjection {
  std::vector<OvbStats> folds;      // projected points + influence values per fold
  std::vector<int> sweeps;          // worst component per fold
  bool converged = true;            // all folds, all components
  double tau = 0.0, sigma2 = 0.0, nu2 = 0.0;  // medians over folds
};
OvbProjection ovb_project(const Dataset& ds, const OvbShortFit& fit, const ProjectionSpec& pspec,
                          std::uint64_t seed, int jobs = 1);

// Bias band for the long-model contrast when an omitted confounder explains
// eta2_y of the residual outcome variance and eta2_t of the residual
// treatment odds: half-width |rho| sigma nu C_y C_t with C_y^2 = eta2_y,
// C_t^2 = eta2_t/(1-eta2_t). The interval is centered at the median fold
// contrast with the median fold half-width, so hi - point == point - lo holds
// exactly; end-point variances are medians of the per-fold one-step variances.
struct OvbBoundRow {
  double eta2_y = 0.0, eta2_t = 0.0, rho = 1.0;
  bool projected = false;
  double tau = 0.0;
  double tau_lo = 0.0, tau_hi = 0.0;
  double var_lo = 0.0, var_hi = 0.0;
  double half = 0.0;
};

OvbBoundRow ovb_bounds(const OvbShortFit& fit, double eta2_y, double eta2_t, double rho);
OvbBoundRow ovb_bounds_projected(const OvbShortFit& fit, const OvbProjection& prj, double eta2_y,
                                 double eta2_t, double rho);

}  // namespace ifproj

#endif
