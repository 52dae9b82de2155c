#ifndef IFPROJ_LEARNERS_HPP
#define IFPROJ_LEARNERS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace ifproj {

enum class Task { regression, probability };

// probability predictions are clipped to this closed interval
inline constexpr double kProbClipLo = 1e-6;
inline constexpr double kProbClipHi = 1.0 - 1e-6;

// columns appended by the optional pairwise expansion: x_f * x_g for f < g
Eigen::MatrixXd expand_pairwise(const Eigen::MatrixXd& x);

struct LinearModel {
  Eigen::VectorXd beta;  // intercept first
  bool pairwise = false;
  bool min_norm_fallback = false;
  int p_raw = 0;
};

struct LogisticModel {
  Eigen::VectorXd beta;
  bool pairwise = false;
  bool converged = false;
  int iterations = 0;
  int p_raw = 0;
};

struct KnnModel {
  Eigen::MatrixXd xs;  // standardized training features
  Eigen::VectorXd ys;
  Eigen::VectorXd center, scale;
  int k = 1;
};

// one boosted tree: axis split (fb < 0) or a 4-leaf two-feature split
struct BoostTree {
  int fa = -1;
  double ta = 0.0;
  int fb = -1;
  double tb = 0.0;
  double leaf[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
};

struct BoostModel {
  double base = 0.0;
  std::vector<BoostTree> trees;
  int depth = 1;
  double rate = 0.1;
};

using AnyModel = std::variant<LinearModel, LogisticModel, KnnModel, BoostModel>;

struct Model {
  AnyModel impl;
  Task task = Task::regression;
  std::string label;
};

// ridge >= 0 penalizes non-intercept coefficients; ridge == 0 with a
// rank-deficient design falls back to the minimum-norm solution (flagged)
LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                       bool pairwise = false);

// penalized IRLS with step halving; the penalized log-likelihood is
// nondecreasing across iterations by construction
LogisticModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                           int max_iter = 200, double tol = 1e-10, bool pairwise = false);

// mean of the k nearest training outcomes in standardized feature space;
// distance ties break toward the lower training index
KnnModel fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k);

// least-squares boosting on quantile-binned splits; depth 1 = stumps,
// depth 2 also searches two-feature 4-leaf trees. Deterministic.
BoostModel fit_boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int rounds, double rate,
                     int depth, int bins = 16);

Eigen::VectorXd predict(const Model& m, const Eigen::MatrixXd& x);
double predict_one(const Model& m, const Eigen::RowVectorXd& x);

struct EnsembleConfig {
  double ridge = 1e-6;
  std::vector<int> knn_k = {10, 50};
  int boost_rounds = 200;
  double boost_rate = 0.1;
  int boost_depth = 1;
  int boost_bins = 16;
  int cv_folds = 5;
  bool stacking = false;  // default discrete selection
  bool with_plain_glm = true;
  bool with_pairwise_glm = true;
  bool with_knn = true;
  bool with_boost = true;
  int logit_max_iter = 200;
  double logit_tol = 1e-10;
};

struct Ensemble {
  std::vector<Model> models;          // refit on the full training data
  Eigen::VectorXd weights;            // simplex weights (one-hot when discrete)
  Eigen::VectorXd cv_risks;           // per candidate; failed fits carry +inf
  std::vector<std::string> warnings;  // dropped candidates etc.
  int selected = -1;                  // argmin risk (ties -> earliest)
  bool stacked = false;
  Task task = Task::regression;
};

// cross-validated discrete selection (or simplex stacking); seed drives the
// internal cv fold shuffle only
Ensemble fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Task task,
                      const EnsembleConfig& cfg, std::uint64_t seed);

Eigen::VectorXd predict(const Ensemble& e, const Eigen::MatrixXd& x);

}  // namespace ifproj

#endif
