#ifndef IFPROJ_PROJECT_HPP
#define IFPROJ_PROJECT_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "ifproj/graph.hpp"
#include "ifproj/learners.hpp"

namespace ifproj {

inline constexpr double kDefaultProjectionEps = 4e-4;
inline constexpr int kDefaultMaxSweeps = 25;

enum class CondMeanPolicy { exact_discrete, ensemble };

// which coordinates of the (i, j, S) triple a conditional mean keeps
enum class Keep { ijs, is, js, s };

struct CondMeanConfig {
  CondMeanPolicy policy = CondMeanPolicy::ensemble;
  EnsembleConfig learners;        // joint-model candidate grid
  int max_exact_levels = 16;      // exact policy rejects covariates above this
  bool force_generic_eval = false;  // always use the per-point reference path
  int jobs = 1;                   // threads for the reference marginalization
  std::uint64_t seed = 0;
};

// joint-model grid for projections: GLM with pairwise products plus depth-2
// boosted trees; knn is excluded because it cannot use the factorized grid
// evaluation (config can still enable it, which switches to the per-point path)
CondMeanConfig default_cond_mean_config(std::uint64_t seed = 0);

// Fitted E[phi | X_i, X_j, X_S] plus everything marginalization needs: the
// fit-sample features act as the empirical distribution the dropped
// coordinates are integrated over.
struct JointCondMean {
  CondMeanPolicy policy = CondMeanPolicy::ensemble;
  CiConstraint c;
  int n_fit = 0;
  Eigen::MatrixXd feats;   // fit rows x [x_i, x_j, x_S...]
  Eigen::VectorXd phi;
  double grand_mean = 0.0;
  bool force_generic = false;
  int jobs = 1;
  // ensemble policy
  Ensemble joint;
  Eigen::MatrixXd b;      // [1, X_S] on the fit sample (read-off design)
  Eigen::MatrixXd ginv;   // (B'B)^{-1}, ridged when singular
  bool ridge_fallback = false;
  // exact policy: group means keyed by the kept value tuple
  std::map<std::vector<double>, double> cells_ijs, cells_is, cells_js, cells_s;
};

// columns (x_i, x_j, x_S...) of x in constraint order
Eigen::MatrixXd joint_features(const Eigen::MatrixXd& x, const CiConstraint& c);

JointCondMean fit_joint_cond_mean(const Eigen::VectorXd& phi_fit, const Eigen::MatrixXd& x_fit,
                                  const CiConstraint& c, const CondMeanConfig& cfg,
                                  std::uint64_t salt = 0);

// Conditional mean at every x_pred row. Dropped coordinates are averaged over
// the fit sample with linear read-off on X_S (plain averaging when S is
// empty); exact policy uses group means with unseen cells falling back to the
// fit grand mean.
Eigen::VectorXd marginalize_cond_mean(const JointCondMean& jm, const Eigen::MatrixXd& x_pred,
                                      Keep keep);

// reference implementation: naive per-point model evaluation over the whole
// grid; jobs=1 is the serial baseline, jobs>1 runs the OpenMP kernel. Output
// is bit-identical across jobs values.
Eigen::VectorXd marginalize_reference(const JointCondMean& jm, const Eigen::MatrixXd& x_pred,
                                      Keep keep, int jobs);

// true when every weighted model in the fitted joint supports the factorized
// grid evaluation (linear/boost; not knn/logistic)
bool can_factorize(const JointCondMean& jm);

// phi - E[phi|Xi,Xj,XS] + E[phi|Xi,XS] + E[phi|Xj,XS] - E[phi|XS]
Eigen::VectorXd project_single(const Eigen::VectorXd& phi, const Eigen::MatrixXd& x,
                               const CiConstraint& c, const CondMeanConfig& cfg);

struct ProjectionResult {
  Eigen::VectorXd projected;          // apply rows (all rows in-sample)
  int sweeps = 0;
  std::vector<double> delta_history;  // mean squared change per full sweep
  bool converged = false;
  double var_before = 0.0;
  double var_after = 0.0;
};

// Cyclic sweeps over the constraint list, conditional means refit on the
// current iterate at every step; stops once the sweep's mean squared change
// is <= eps or max_sweeps is hit. A single constraint returns after one sweep
// (one exact projection already lands in the constraint set).
ProjectionResult alternating_project(const Eigen::VectorXd& phi, const Eigen::MatrixXd& x,
                                     const std::vector<CiConstraint>& cs,
                                     const CondMeanConfig& cfg,
                                     double eps = kDefaultProjectionEps,
                                     int max_sweeps = kDefaultMaxSweeps);

// Split form used by cross-fitting: conditional means are fit on (phi_fit,
// x_fit) and the empirical marginalization runs over those rows, while both
// segments are updated every step. The result covers the apply rows.
ProjectionResult alternating_project_split(const Eigen::VectorXd& phi_fit,
                                           const Eigen::MatrixXd& x_fit,
                                           const Eigen::VectorXd& phi_apply,
                                           const Eigen::MatrixXd& x_apply,
                                           const std::vector<CiConstraint>& cs,
                                           const CondMeanConfig& cfg,
                                           double eps = kDefaultProjectionEps,
                                           int max_sweeps = kDefaultMaxSweeps);

struct VarianceGain {
  double var_before = 0.0;
  double var_after = 0.0;
  // Var(E[phi|Xi,Xj,XS]) - Var(E[phi|Xi,XS]) - Var(E[phi|Xj,XS]); with S
  // empty this is the variance-inflation diagnostic the projection removes
  double joint_gain = 0.0;
};

VarianceGain variance_gain(const Eigen::VectorXd& phi, const Eigen::MatrixXd& x,
                           const CiConstraint& c, const CondMeanConfig& cfg);

}  // namespace ifproj

#endif
