#include "ifproj/ovb.hpp"

#include <algorithm>
#include <cmath>

#include "ifproj/errors.hpp"
#include "ifproj/parallel.hpp"
#include "ifproj/rng.hpp"
#include "ifproj/stats.hpp"

namespace ifproj {

namespace {

constexpr std::uint64_t kLabelFolds = 1;
constexpr std::uint64_t kLabelNuisance = 2;
constexpr std::uint64_t kLabelProjection = 3;

void check_sensitivity_params(double eta2_y, double eta2_t, double rho) {
  if (!(eta2_y >= 0.0 && eta2_y <= 1.0)) throw DomainError("eta2_y must lie in [0,1]");
  if (!(eta2_t >= 0.0 && eta2_t < 1.0)) throw DomainError("eta2_t must lie in [0,1)");
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("rho must lie in [-1,1]");
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& rows) {
  Eigen::VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out(i) = v(rows[i]);
  return out;
}

Eigen::VectorXi gather_i(const Eigen::VectorXi& v, const std::vector<int>& rows) {
  Eigen::VectorXi out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out(i) = v(rows[i]);
  return out;
}

struct BandPieces {
  double half = 0.0;
  Eigen::VectorXd if_lo, if_hi;
};

// half-width and end-point influence values for one fold
BandPieces band_pieces(const OvbStats& st, double eta2_y, double eta2_t, double rho) {
  const double cy = std::sqrt(eta2_y);
  const double ct = std::sqrt(eta2_t / (1.0 - eta2_t));
  BandPieces bp;
  if (cy * ct == 0.0 || rho == 0.0) {
    // band collapses onto the point estimate; the ends share its influence values
    bp.if_lo = st.if_tau;
    bp.if_hi = st.if_tau;
    return bp;
  }
  if (!(st.sigma2 > 0.0) || !(st.nu2 > 0.0))
    throw EstimationError("bias band undefined: nonpositive second moment (sigma2=" +
                          std::to_string(st.sigma2) + ", nu2=" + std::to_string(st.nu2) + ")");
  const double s = std::sqrt(st.sigma2 * st.nu2);
  bp.half = std::abs(rho) * cy * ct * s;
  const double scale = std::abs(rho) * cy * ct / (2.0 * s);
  const Eigen::VectorXd d_half = scale * (st.sigma2 * st.if_nu2 + st.nu2 * st.if_sigma2);
  bp.if_lo = st.if_tau - d_half;
  bp.if_hi = st.if_tau + d_half;
  return bp;
}

OvbBoundRow bounds_impl(const std::vector<OvbStats>& folds, bool projected, double eta2_y,
                        double eta2_t, double rho) {
  check_sensitivity_params(eta2_y, eta2_t, rho);
  if (folds.empty()) throw DomainError("ovb_bounds: empty fit");
  std::vector<double> taus, vlo, vhi, halves;
  for (const OvbStats& st : folds) {
    const BandPieces bp = band_pieces(st, eta2_y, eta2_t, rho);
    const Eigen::Index nk = st.if_tau.size();
    taus.push_back(st.tau);
    vlo.push_back(sample_var(bp.if_lo) / nk);
    vhi.push_back(sample_var(bp.if_hi) / nk);
    halves.push_back(bp.half);
  }
  OvbBoundRow row;
  row.eta2_y = eta2_y;
  row.eta2_t = eta2_t;
  row.rho = rho;
  row.projected = projected;
  row.tau = median(taus);
  row.half = median(halves);
  row.tau_lo = row.tau - row.half;
  row.tau_hi = row.tau + row.half;
  row.var_lo = median(vlo);
  row.var_hi = median(vhi);
  return row;
}

}  // namespace

Eigen::VectorXd riesz_ate(const Eigen::VectorXi& t, const Eigen::VectorXd& pi) {
  if (t.size() != pi.size()) throw DomainError("riesz_ate: shape mismatch");
  Eigen::VectorXd a(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(pi(i) > 0.0 && pi(i) < 1.0)) throw DomainError("riesz_ate: propensity outside (0,1)");
    a(i) = t(i) == 1 ? 1.0 / pi(i) : -1.0 / (1.0 - pi(i));
  }
  return a;
}

OvbStats ovb_stats(const Eigen::VectorXi& t, const Eigen::VectorXd& y, const Eigen::VectorXd& pi,
                   const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu0) {
  const Eigen::Index n = t.size();
  if (y.size() != n || pi.size() != n || mu1.size() != n || mu0.size() != n)
    throw DomainError("ovb_stats: shape mismatch");
  if (n < 2) throw DomainError("ovb_stats needs at least 2 units");
  const Eigen::VectorXd alpha = riesz_ate(t, pi);
  Eigen::VectorXd resid(n), phi_tau(n), mom_nu(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    resid(i) = y(i) - (t(i) == 1 ? mu1(i) : mu0(i));
    phi_tau(i) = alpha(i) * resid(i) + mu1(i) - mu0(i);
    mom_nu(i) = 2.0 * (1.0 / pi(i) + 1.0 / (1.0 - pi(i))) - alpha(i) * alpha(i);
  }
  OvbStats st;
  st.tau = phi_tau.mean();
  st.sigma2 = resid.array().square().mean();
  st.nu2 = mom_nu.mean();  // debiased moment, so if_nu2 is exactly mean-zero
  st.if_tau = phi_tau.array() - st.tau;
  st.if_sigma2 = resid.array().square() - st.sigma2;
  st.if_nu2 = mom_nu.array() - st.nu2;
  return st;
}

OvbConfig default_ovb_config() {
  OvbConfig cfg;
  // heavily smoothed nearest-neighbour nuisances: the bias-band moments
  // involve 1/pi and alpha^2, which explode when a flexible propensity fit
  // chases the tails of the index; wide-k smoothing keeps nu2 estimable at
  // moderate n (sharper fits are available through the config)
  auto knn_only = [](std::vector<int> ks) {
    EnsembleConfig e;
    e.with_plain_glm = false;
    e.with_pairwise_glm = false;
    e.with_boost = false;
    e.with_knn = true;
    e.knn_k = std::move(ks);
    return e;
  };
  cfg.propensity = knn_only({50, 100});
  cfg.outcome = knn_only({25, 50});
  return cfg;
}

OvbShortFit ovb_short_fit(const Dataset& ds, const OvbConfig& cfg, std::uint64_t seed, int jobs) {
  if (cfg.k_folds < 2) throw InfeasibleSplitError("cross-fitting needs at least 2 folds");
  if (!(cfg.trunc_lo > 0.0 && cfg.trunc_lo < cfg.trunc_hi && cfg.trunc_hi < 1.0))
    throw DomainError("propensity truncation bounds must satisfy 0 < lo < hi < 1");

  const FoldAssignment fa = assign_folds(ds, cfg.k_folds, SeedTree(seed).child(kLabelFolds).key());
  OvbShortFit fit;
  fit.n = ds.n();
  fit.k_folds = cfg.k_folds;
  fit.fold_of = fa.fold;
  fit.folds.resize(cfg.k_folds);

  parallel_for(cfg.k_folds, jobs, [&](int fk) {
    const int fold = fk + 1;
    const std::vector<int> eval_rows = rows_where(fa.fold, fold, true);
    const std::vector<int> train_rows = rows_where(fa.fold, fold, false);
    const Dataset train = subset(ds, train_rows);

    std::vector<int> rows1, rows0;
    for (int r = 0; r < train.n(); ++r) (train.t(r) == 1 ? rows1 : rows0).push_back(r);
    if (rows1.size() < 4 || rows0.size() < 4)
      throw InfeasibleSplitError("nuisance fit needs at least 4 units per arm in training");
    const Dataset d1 = subset(train, rows1);
    const Dataset d0 = subset(train, rows0);

    SeedTree st(SeedTree(seed).child({kLabelNuisance, (std::uint64_t)fold}).key());
    OvbFoldData& fd = fit.folds[fk];
    fd.fold = fold;
    fd.eval_rows = eval_rows;

    const Ensemble prop = fit_ensemble(train.x, train.t.cast<double>(), Task::probability,
                                       cfg.propensity, st.child(1).key());
    const Ensemble out1 =
        fit_ensemble(d1.x, d1.y, Task::regression, cfg.outcome, st.child(2).key());
    const Ensemble out0 =
        fit_ensemble(d0.x, d0.y, Task::regression, cfg.outcome, st.child(3).key());

    fd.pi_all = predict(prop, ds.x);
    for (Eigen::Index i = 0; i < fd.pi_all.size(); ++i)
      fd.pi_all(i) = std::clamp(fd.pi_all(i), cfg.trunc_lo, cfg.trunc_hi);
    fd.mu1_all = predict(out1, ds.x);
    fd.mu0_all = predict(out0, ds.x);

    fd.stats = ovb_stats(gather_i(ds.t, eval_rows), gather(ds.y, eval_rows),
                         gather(fd.pi_all, eval_rows), gather(fd.mu1_all, eval_rows),
                         gather(fd.mu0_all, eval_rows));
  });

  fit.pi.resize(ds.n());
  fit.mu1.resize(ds.n());
  fit.mu0.resize(ds.n());
  std::vector<double> taus, sigmas, nus, vars;
  for (const auto& fd : fit.folds) {
    for (int r : fd.eval_rows) {
      fit.pi(r) = fd.pi_all(r);
      fit.mu1(r) = fd.mu1_all(r);
      fit.mu0(r) = fd.mu0_all(r);
    }
    taus.push_back(fd.stats.tau);
    sigmas.push_back(fd.stats.sigma2);
    nus.push_back(fd.stats.nu2);
    vars.push_back(sample_var(fd.stats.if_tau) / fd.stats.if_tau.size());
  }
  fit.alpha = riesz_ate(ds.t, fit.pi);
  fit.tau = median(taus);
  fit.sigma2 = median(sigmas);
  fit.nu2 = median(nus);
  fit.var_tau = median(vars);
  if (fit.nu2 < kRieszSecondMomentFloor - 1e-9)
    throw EstimationError("representer second moment " + std::to_string(fit.nu2) +
                          " below the theoretical floor of 4; propensity fit unusable");
  return fit;
}

OvbProjection ovb_project(const Dataset& ds, const OvbShortFit& fit, const ProjectionSpec& pspec,
                          std::uint64_t seed, int jobs) {
  const int k = fit.k_folds;
  OvbProjection prj;
  prj.folds.resize(k);
  prj.sweeps.assign(k, 0);
  std::vector<char> conv(k, 1);

  parallel_for(k, jobs, [&](int fk) {
    const OvbFoldData& fd = fit.folds[fk];
    const std::vector<int> train_rows = rows_where(fit.fold_of, fd.fold, false);
    const Eigen::MatrixXd x_train = subset(ds, train_rows).x;
    const Eigen::MatrixXd x_eval = subset(ds, fd.eval_rows).x;

    // influence values on any row set from this fold's nuisances, centered at
    // the fold's own points
    auto component_values = [&](const std::vector<int>& rows, int comp) {
      Eigen::VectorXd v(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int r = rows[i];
        const double pi = fd.pi_all(r);
        const double a = ds.t(r) == 1 ? 1.0 / pi : -1.0 / (1.0 - pi);
        const double mu = ds.t(r) == 1 ? fd.mu1_all(r) : fd.mu0_all(r);
        const double resid = ds.y(r) - mu;
        if (comp == 0)
          v(i) = a * resid + fd.mu1_all(r) - fd.mu0_all(r) - fd.stats.tau;
        else if (comp == 1)
          v(i) = resid * resid - fd.stats.sigma2;
        else
          v(i) = 2.0 * (1.0 / pi + 1.0 / (1.0 - pi)) - a * a - fd.stats.nu2;
      }
      return v;
    };

    OvbStats& out = prj.folds[fk];
    for (int comp = 0; comp < 3; ++comp) {
      CondMeanConfig cond = pspec.cond;
      cond.seed = SeedTree(seed)
                      .child({kLabelProjection, (std::uint64_t)fd.fold, (std::uint64_t)comp})
                      .key();
      const ProjectionResult pr =
          pspec.fit_in_fold
              ? alternating_project(component_values(fd.eval_rows, comp), x_eval,
                                    pspec.constraints, cond, pspec.eps, pspec.max_sweeps)
              : alternating_project_split(component_values(train_rows, comp), x_train,
                                          component_values(fd.eval_rows, comp), x_eval,
                                          pspec.constraints, cond, pspec.eps, pspec.max_sweeps);
      const double point = comp == 0   ? fd.stats.tau
                           : comp == 1 ? fd.stats.sigma2
                                       : fd.stats.nu2;
      const double shifted = point + pr.projected.mean();
      const Eigen::VectorXd centered = pr.projected.array() - pr.projected.mean();
      if (comp == 0) {
        out.tau = shifted;
        out.if_tau = centered;
      } else if (comp == 1) {
        out.sigma2 = shifted;
        out.if_sigma2 = centered;
      } else {
        out.nu2 = shifted;
        out.if_nu2 = centered;
      }
      prj.sweeps[fk] = std::max(prj.sweeps[fk], pr.sweeps);
      conv[fk] = conv[fk] && pr.converged ? 1 : 0;
    }
  });

  std::vector<double> taus, sigmas, nus;
  for (int fk = 0; fk < k; ++fk) {
    prj.converged = prj.converged && conv[fk];
    taus.push_back(prj.folds[fk].tau);
    sigmas.push_back(prj.folds[fk].sigma2);
    nus.push_back(prj.folds[fk].nu2);
  }
  prj.tau = median(taus);
  prj.sigma2 = median(sigmas);
  prj.nu2 = median(nus);
  return prj;
}

OvbBoundRow ovb_bounds(const OvbShortFit& fit, double eta2_y, double eta2_t, double rho) {
  std::vector<OvbStats> folds;
  for (const auto& fd : fit.folds) folds.push_back(fd.stats);
  return bounds_impl(folds, false, eta2_y, eta2_t, rho);
}

OvbBoundRow ovb_bounds_projected(const OvbShortFit& fit, const OvbProjection& prj, double eta2_y,
                                 double eta2_t, double rho) {
  if (prj.folds.size() != fit.folds.size())
    throw DomainError("ovb_bounds_projected: projection does not match the fit");
  return bounds_impl(prj.folds, true, eta2_y, eta2_t, rho);
}

}  // namespace ifproj
