#include "ifproj/sens.hpp"

#include <algorithm>
#include <cmath>

#include "ifproj/errors.hpp"
#include "ifproj/parallel.hpp"
#include "ifproj/rng.hpp"
#include "ifproj/stats.hpp"

namespace ifproj {

namespace {

void check_gamma(double gamma) {
  if (!std::isfinite(gamma) || std::abs(gamma) > kMaxTiltGamma)
    throw DomainError("tilt parameter must be finite with |gamma| <= " +
                      std::to_string(kMaxTiltGamma));
}

void check_mu(double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("outcome mean outside [0,1]");
}

// seed-tree labels for the independent random streams of one estimation run
constexpr std::uint64_t kLabelFolds = 1;
constexpr std::uint64_t kLabelNuisance = 2;
constexpr std::uint64_t kLabelProjection = 3;

}  // namespace

TiltedMoments tilted_moments(double mu, double gamma) {
  check_gamma(gamma);
  check_mu(mu);
  TiltedMoments tm;
  tm.m1 = mu * std::exp(gamma);
  tm.m0 = tm.m1 + (1.0 - mu);
  return tm;
}

double tilt_ratio(double mu, double gamma) {
  check_gamma(gamma);
  check_mu(mu);
  return mu / (mu + (1.0 - mu) * std::exp(-gamma));
}

double tilt_weight(double y, double mu, double gamma) {
  check_gamma(gamma);
  check_mu(mu);
  if (y != 0.0 && y != 1.0) throw DomainError("tilt_weight expects a 0/1 outcome");
  // e^{gy} / (mu e^g + 1 - mu), written so no factor exceeds e^{|g|}
  if (y == 1.0) return 1.0 / (mu + (1.0 - mu) * std::exp(-gamma));
  return 1.0 / (mu * std::exp(gamma) + (1.0 - mu));
}

NuisanceConfig default_nuisance_config() {
  NuisanceConfig cfg;
  // additive GLMs, knn, and depth-2 trees: a generic stack whose interactions
  // come only from the nonparametric members. The product-feature GLMs stay
  // available via config but are off by default; as parametric matches for
  // product-form signals they adjust so sharply that results are no longer
  // comparable with generic-stack references.
  cfg.propensity.boost_depth = 2;
  cfg.propensity.with_pairwise_glm = false;
  cfg.outcome.boost_depth = 2;
  cfg.outcome.with_pairwise_glm = false;
  return cfg;
}

NuisanceFit fit_nuisances(const Dataset& train, const NuisanceConfig& cfg, std::uint64_t seed) {
  if (!(cfg.trunc_lo > 0.0 && cfg.trunc_lo < cfg.trunc_hi && cfg.trunc_hi < 1.0))
    throw DomainError("propensity truncation bounds must satisfy 0 < lo < hi < 1");
  for (Eigen::Index i = 0; i < train.y.size(); ++i)
    if (train.y(i) != 0.0 && train.y(i) != 1.0)
      throw DomainError("tilted estimation requires a 0/1 outcome");

  std::vector<int> rows1, rows0;
  for (Eigen::Index i = 0; i < train.t.size(); ++i)
    (train.t(i) == 1 ? rows1 : rows0).push_back(static_cast<int>(i));
  if (rows1.size() < 4 || rows0.size() < 4)
    throw InfeasibleSplitError("nuisance fit needs at least 4 units per arm, got " +
                               std::to_string(rows1.size()) + "/" + std::to_string(rows0.size()));
  const Dataset d1 = subset(train, rows1);
  const Dataset d0 = subset(train, rows0);

  SeedTree st(seed);
  NuisanceFit f;
  f.trunc_lo = cfg.trunc_lo;
  f.trunc_hi = cfg.trunc_hi;
  f.propensity =
      fit_ensemble(train.x, train.t.cast<double>(), Task::probability, cfg.propensity,
                   st.child(1).key());
  f.outcome1 = fit_ensemble(d1.x, d1.y, Task::probability, cfg.outcome, st.child(2).key());
  f.outcome0 = fit_ensemble(d0.x, d0.y, Task::probability, cfg.outcome, st.child(3).key());
  return f;
}

NuisancePred predict_nuisances(const NuisanceFit& f, const Eigen::MatrixXd& x) {
  NuisancePred np;
  np.pi1 = predict(f.propensity, x);
  for (Eigen::Index i = 0; i < np.pi1.size(); ++i)
    np.pi1(i) = std::clamp(np.pi1(i), f.trunc_lo, f.trunc_hi);
  np.mu1 = predict(f.outcome1, x);
  np.mu0 = predict(f.outcome0, x);
  return np;
}

double plugin_psi(const NuisancePred& np, double gamma, int arm) {
  if (arm != 0 && arm != 1) throw DomainError("arm must be 0 or 1");
  check_gamma(gamma);
  const Eigen::Index n = np.pi1.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = arm == 1 ? np.mu1(i) : np.mu0(i);
    const double pi_t = arm == 1 ? np.pi1(i) : 1.0 - np.pi1(i);
    acc += mu * pi_t + tilt_ratio(mu, gamma) * (1.0 - pi_t);
  }
  return acc / n;
}

EifPair eif_values_uncentered(const Eigen::VectorXi& t, const Eigen::VectorXd& y,
                              const NuisancePred& np, double gamma) {
  check_gamma(gamma);
  const Eigen::Index n = t.size();
  if (y.size() != n || np.pi1.size() != n)
    throw DomainError("eif_values_uncentered: shape mismatch");
  EifPair e;
  e.phi1.resize(n);
  e.phi0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = np.pi1(i);
    {  // arm 1: treated units carry the weighted residual, controls the ratio
      const double mu = np.mu1(i);
      const double r = tilt_ratio(mu, gamma);
      if (t(i) == 1) {
        const double w = tilt_weight(y(i), mu, gamma);
        e.phi1(i) = y(i) + ((1.0 - pi) / pi) * w * (y(i) - r);
      } else {
        e.phi1(i) = r;
      }
    }
    {  // arm 0: mirror with the control propensity
      const double mu = np.mu0(i);
      const double r = tilt_ratio(mu, gamma);
      if (t(i) == 0) {
        const double w = tilt_weight(y(i), mu, gamma);
        e.phi0(i) = y(i) + (pi / (1.0 - pi)) * w * (y(i) - r);
      } else {
        e.phi0(i) = r;
      }
    }
  }
  return e;
}

FoldEstimate fold_estimate(const EifPair& e) {
  const Eigen::Index n = e.phi1.size();
  if (n < 2) throw DomainError("fold_estimate needs at least 2 units");
  FoldEstimate fe;
  fe.psi1 = e.phi1.mean();
  fe.psi0 = e.phi0.mean();
  fe.tau = fe.psi1 - fe.psi0;
  fe.var1 = sample_var(e.phi1) / n;
  fe.var0 = sample_var(e.phi0) / n;
  fe.var_tau = sample_var(e.phi1 - e.phi0) / n;
  return fe;
}

namespace {

struct FoldSlot {
  std::vector<FoldDetail> details;  // per gamma x variant, fixed order
};

CurvePoint aggregate(const std::vector<FoldDetail>& all, double gamma, bool projected) {
  std::vector<double> psi1, psi0, tau, var1, var0, var_tau;
  CurvePoint pt;
  pt.gamma = gamma;
  pt.projected = projected;
  for (const auto& fd : all) {
    if (fd.gamma != gamma || fd.projected != projected) continue;
    psi1.push_back(fd.est.psi1);
    psi0.push_back(fd.est.psi0);
    tau.push_back(fd.est.tau);
    var1.push_back(fd.est.var1);
    var0.push_back(fd.est.var0);
    var_tau.push_back(fd.est.var_tau);
    pt.converged = pt.converged && fd.converged;
    pt.max_sweeps_used = std::max(pt.max_sweeps_used, fd.sweeps);
  }
  pt.psi1 = median(psi1);
  pt.psi0 = median(psi0);
  pt.tau = median(tau);
  pt.var1 = median(var1);
  pt.var0 = median(var0);
  pt.var_tau = median(var_tau);
  return pt;
}

}  // namespace

SensitivityCurve cross_fit_curve(const Dataset& ds, const std::vector<double>& gammas,
                                 int k_folds, const NuisanceConfig& ncfg,
                                 const ProjectionSpec& pspec, std::uint64_t seed, int jobs) {
  if (gammas.empty()) throw DomainError("cross_fit_curve: empty tilt grid");
  for (double g : gammas) check_gamma(g);
  if (k_folds < 2) throw InfeasibleSplitError("cross-fitting needs at least 2 folds");
  const bool with_projection = !pspec.constraints.empty();

  SeedTree st(seed);
  const FoldAssignment fa = assign_folds(ds, k_folds, st.child(kLabelFolds).key());
  const int g_count = static_cast<int>(gammas.size());

  std::vector<FoldSlot> slots(k_folds);
  parallel_for(k_folds, jobs, [&](int fk) {
    const int fold = fk + 1;
    const std::vector<int> eval_rows = rows_where(fa.fold, fold, true);
    const std::vector<int> train_rows = rows_where(fa.fold, fold, false);
    const Dataset train = subset(ds, train_rows);
    const Dataset eval = subset(ds, eval_rows);

    const NuisanceFit nf =
        fit_nuisances(train, ncfg, SeedTree(seed).child({kLabelNuisance, (std::uint64_t)fold}).key());
    const NuisancePred np_eval = predict_nuisances(nf, eval.x);
    const NuisancePred np_train = predict_nuisances(nf, train.x);

    auto& out = slots[fk].details;
    for (int gi = 0; gi < g_count; ++gi) {
      const double gamma = gammas[gi];
      const EifPair e_eval = eif_values_uncentered(eval.t, eval.y, np_eval, gamma);

      FoldDetail fd;
      fd.fold = fold;
      fd.gamma = gamma;
      fd.projected = false;
      fd.est = fold_estimate(e_eval);
      out.push_back(fd);

      if (!with_projection) continue;
      const EifPair e_train = eif_values_uncentered(train.t, train.y, np_train, gamma);
      FoldDetail pd;
      pd.fold = fold;
      pd.gamma = gamma;
      pd.projected = true;
      EifPair projected;
      for (int arm = 0; arm < 2; ++arm) {
        CondMeanConfig cond = pspec.cond;
        cond.seed = SeedTree(seed)
                        .child({kLabelProjection, (std::uint64_t)fold, (std::uint64_t)gi,
                                (std::uint64_t)arm})
                        .key();
        const Eigen::VectorXd& phi_eval = arm == 1 ? e_eval.phi1 : e_eval.phi0;
        const ProjectionResult pr =
            pspec.fit_in_fold
                ? alternating_project(phi_eval, eval.x, pspec.constraints, cond, pspec.eps,
                                      pspec.max_sweeps)
                : alternating_project_split(arm == 1 ? e_train.phi1 : e_train.phi0, train.x,
                                            phi_eval, eval.x, pspec.constraints, cond, pspec.eps,
                                            pspec.max_sweeps);
        (arm == 1 ? projected.phi1 : projected.phi0) = pr.projected;
        pd.sweeps = std::max(pd.sweeps, pr.sweeps);
        pd.converged = pd.converged && pr.converged;
      }
      pd.est = fold_estimate(projected);
      out.push_back(pd);
    }
  });

  SensitivityCurve curve;
  curve.n = static_cast<int>(ds.n());
  curve.k_folds = k_folds;
  for (int fk = 0; fk < k_folds; ++fk)
    curve.folds.insert(curve.folds.end(), slots[fk].details.begin(), slots[fk].details.end());
  for (int gi = 0; gi < g_count; ++gi) {
    curve.points.push_back(aggregate(curve.folds, gammas[gi], false));
    if (with_projection) curve.points.push_back(aggregate(curve.folds, gammas[gi], true));
  }
  return curve;
}

}  // namespace ifproj
