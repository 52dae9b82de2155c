#include "ifproj/project.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "ifproj/errors.hpp"
#include "ifproj/parallel.hpp"
#include "ifproj/rng.hpp"
#include "ifproj/stats.hpp"

namespace ifproj {

namespace {

// per joint-feature column: does the value at a grid point come from the
// prediction row (kept) or from the marginalization sample (dropped)?
std::vector<bool> kept_mask(int s_count, Keep keep) {
  std::vector<bool> m(2 + s_count, false);
  switch (keep) {
    case Keep::ijs:
      std::fill(m.begin(), m.end(), true);
      break;
    case Keep::is:
      m[0] = true;
      break;
    case Keep::js:
      m[1] = true;
      break;
    case Keep::s:
      break;  // handled by the two-stage path
  }
  return m;
}

std::vector<double> cell_key(const Eigen::MatrixXd& feats, Eigen::Index row, Keep keep) {
  const int s_count = static_cast<int>(feats.cols()) - 2;
  std::vector<double> key;
  if (keep == Keep::ijs || keep == Keep::is) key.push_back(feats(row, 0));
  if (keep == Keep::ijs || keep == Keep::js) key.push_back(feats(row, 1));
  for (int s = 0; s < s_count; ++s) key.push_back(feats(row, 2 + s));
  return key;
}

std::map<std::vector<double>, double> group_means(const Eigen::MatrixXd& feats,
                                                  const Eigen::VectorXd& phi, Keep keep) {
  std::map<std::vector<double>, std::pair<double, int>> acc;
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    auto& slot = acc[cell_key(feats, i, keep)];
    slot.first += phi(i);
    slot.second += 1;
  }
  std::map<std::vector<double>, double> out;
  for (const auto& [key, sc] : acc) out[key] = sc.first / sc.second;
  return out;
}

double ens_predict_one(const Ensemble& e, const Eigen::RowVectorXd& x) {
  double v = 0.0;
  for (int ci = 0; ci < static_cast<int>(e.weights.size()); ++ci)
    if (e.weights(ci) != 0.0) v += e.weights(ci) * predict_one(e.models[ci], x);
  return v;
}

// ---- factorized grid evaluation -------------------------------------------
//
// For grid points that take kept coordinates from prediction row u and dropped
// coordinates from fit row m, linear and boosted-tree models decompose as
//   f(point(u, m)) = sum_k g_k(u) * h_k(m),
// so every weighted average over m reduces to small matrix products. This is
// an exact reordering of the naive evaluation.

struct GridFactor {
  std::vector<Eigen::VectorXd> g;  // over prediction rows
  std::vector<Eigen::VectorXd> h;  // over fit rows
};

bool factor_linear(const LinearModel& lin, double w, const Eigen::MatrixXd& fp,
                   const Eigen::MatrixXd& fm, const std::vector<bool>& from_u, GridFactor& out) {
  const int f_count = static_cast<int>(fp.cols());
  const Eigen::Index np = fp.rows(), nm = fm.rows();
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(np);                  // u-only terms
  Eigen::VectorXd h0 = Eigen::VectorXd::Constant(nm, lin.beta(0));  // const + m-only terms
  std::map<int, Eigen::VectorXd> cross;                             // u-feature -> m-side sum
  auto cross_col = [&](int uf) -> Eigen::VectorXd& {
    auto it = cross.find(uf);
    if (it == cross.end()) it = cross.emplace(uf, Eigen::VectorXd::Zero(nm)).first;
    return it->second;
  };
  for (int f = 0; f < f_count; ++f) {
    const double b = lin.beta(1 + f);
    if (from_u[f])
      g1 += b * fp.col(f);
    else
      h0.array() += b * fm.col(f).array();
  }
  if (lin.pairwise) {
    int c = 1 + f_count;
    for (int f = 0; f < f_count; ++f)
      for (int g = f + 1; g < f_count; ++g, ++c) {
        const double b = lin.beta(c);
        if (from_u[f] && from_u[g])
          g1 += b * fp.col(f).cwiseProduct(fp.col(g));
        else if (!from_u[f] && !from_u[g])
          h0 += b * fm.col(f).cwiseProduct(fm.col(g));
        else if (from_u[f])
          cross_col(f) += b * fm.col(g);
        else
          cross_col(g) += b * fm.col(f);
      }
  }
  out.g.push_back(Eigen::VectorXd::Ones(np));
  out.h.push_back(w * h0);
  out.g.push_back(g1);
  out.h.push_back(Eigen::VectorXd::Constant(nm, w));
  for (auto& [uf, hcol] : cross) {
    out.g.push_back(fp.col(uf));
    out.h.push_back(w * hcol);
  }
  return true;
}

bool factor_boost(const BoostModel& bm, double w, const Eigen::MatrixXd& fp,
                  const Eigen::MatrixXd& fm, const std::vector<bool>& from_u, GridFactor& out) {
  const Eigen::Index np = fp.rows(), nm = fm.rows();
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd h0 = Eigen::VectorXd::Constant(nm, bm.base);
  auto side = [](const Eigen::MatrixXd& m, Eigen::Index r, int f, double thr) {
    return m(r, f) <= thr ? 0 : 1;
  };
  for (const auto& t : bm.trees) {
    const bool ua = from_u[t.fa];
    if (t.fb < 0) {
      if (ua)
        for (Eigen::Index r = 0; r < np; ++r) g1(r) += t.leaf[side(fp, r, t.fa, t.ta)][0];
      else
        for (Eigen::Index r = 0; r < nm; ++r) h0(r) += t.leaf[side(fm, r, t.fa, t.ta)][0];
      continue;
    }
    const bool ub = from_u[t.fb];
    if (ua && ub) {
      for (Eigen::Index r = 0; r < np; ++r)
        g1(r) += t.leaf[side(fp, r, t.fa, t.ta)][side(fp, r, t.fb, t.tb)];
    } else if (!ua && !ub) {
      for (Eigen::Index r = 0; r < nm; ++r)
        h0(r) += t.leaf[side(fm, r, t.fa, t.ta)][side(fm, r, t.fb, t.tb)];
    } else {
      // mixed tree: indicator columns on the u side, leaf rows on the m side
      const int fu = ua ? t.fa : t.fb;
      const double tu = ua ? t.ta : t.tb;
      const int fv = ua ? t.fb : t.fa;
      const double tv = ua ? t.tb : t.ta;
      Eigen::VectorXd glo(np), ghi(np), hlo(nm), hhi(nm);
      for (Eigen::Index r = 0; r < np; ++r) {
        const bool lo = fp(r, fu) <= tu;
        glo(r) = lo ? 1.0 : 0.0;
        ghi(r) = lo ? 0.0 : 1.0;
      }
      for (Eigen::Index r = 0; r < nm; ++r) {
        const int cv = side(fm, r, fv, tv);
        hlo(r) = ua ? t.leaf[0][cv] : t.leaf[cv][0];
        hhi(r) = ua ? t.leaf[1][cv] : t.leaf[cv][1];
      }
      out.g.push_back(std::move(glo));
      out.h.push_back(w * hlo);
      out.g.push_back(std::move(ghi));
      out.h.push_back(w * hhi);
    }
  }
  out.g.push_back(Eigen::VectorXd::Ones(np));
  out.h.push_back(w * h0);
  out.g.push_back(std::move(g1));
  out.h.push_back(Eigen::VectorXd::Constant(nm, w));
  return true;
}

bool factor_model(const Model& m, double w, const Eigen::MatrixXd& fp, const Eigen::MatrixXd& fm,
                  const std::vector<bool>& from_u, GridFactor& out) {
  if (const auto* lin = std::get_if<LinearModel>(&m.impl))
    return factor_linear(*lin, w, fp, fm, from_u, out);
  if (const auto* bst = std::get_if<BoostModel>(&m.impl))
    return factor_boost(*bst, w, fp, fm, from_u, out);
  return false;  // logistic link / knn cannot be decomposed
}

bool model_factorizable(const Model& m) {
  return std::holds_alternative<LinearModel>(m.impl) || std::holds_alternative<BoostModel>(m.impl);
}

// read-off weights: yhat(u) = b_pred(u) G^{-1} B' v(u); with S empty this is
// the plain average over the fit sample
Eigen::MatrixXd readoff_design(const JointCondMean& jm, const Eigen::MatrixXd& feats_pred) {
  const int s_count = static_cast<int>(jm.feats.cols()) - 2;
  Eigen::MatrixXd bp(feats_pred.rows(), 1 + s_count);
  bp.col(0).setOnes();
  for (int s = 0; s < s_count; ++s) bp.col(1 + s) = feats_pred.col(2 + s);
  return bp;
}

Eigen::VectorXd marg_factorized(const JointCondMean& jm, const Eigen::MatrixXd& feats_pred,
                                Keep keep) {
  const int s_count = static_cast<int>(jm.feats.cols()) - 2;
  const auto from_u = kept_mask(s_count, keep);
  GridFactor fac;
  for (int ci = 0; ci < static_cast<int>(jm.joint.weights.size()); ++ci) {
    if (jm.joint.weights(ci) == 0.0) continue;
    if (!factor_model(jm.joint.models[ci], jm.joint.weights(ci), feats_pred, jm.feats, from_u,
                      fac))
      throw EstimationError("marginalize: joint model is not factorizable");
  }
  const int r = static_cast<int>(fac.g.size());
  Eigen::MatrixXd gmat(feats_pred.rows(), r), hmat(jm.n_fit, r);
  for (int k = 0; k < r; ++k) {
    gmat.col(k) = fac.g[k];
    hmat.col(k) = fac.h[k];
  }
  const Eigen::MatrixXd c = jm.b.transpose() * hmat;                       // (1+s) x r
  const Eigen::MatrixXd m = readoff_design(jm, feats_pred) * jm.ginv * c;  // n_pred x r
  return (m.array() * gmat.array()).rowwise().sum();
}

Eigen::VectorXd marg_reference_feats(const JointCondMean& jm, const Eigen::MatrixXd& feats_pred,
                                     Keep keep, int jobs) {
  const int s_count = static_cast<int>(jm.feats.cols()) - 2;
  const auto from_u = kept_mask(s_count, keep);
  const int f_count = 2 + s_count;
  const int np = static_cast<int>(feats_pred.rows());
  const Eigen::MatrixXd bp = readoff_design(jm, feats_pred);
  Eigen::VectorXd out(np);
  parallel_for(np, jobs, [&](int u) {
    Eigen::RowVectorXd point(f_count);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(1 + s_count);
    for (int m = 0; m < jm.n_fit; ++m) {
      for (int f = 0; f < f_count; ++f)
        point(f) = from_u[f] ? feats_pred(u, f) : jm.feats(m, f);
      const double v = ens_predict_one(jm.joint, point);
      a += jm.b.row(m).transpose() * v;
    }
    out(u) = bp.row(u).dot(jm.ginv * a);
  });
  return out;
}

// second stage for E[phi|X_S]: regress the fit-sample values of E[phi|X_j,X_S]
// on X_S and read the fit off at each prediction row
Eigen::VectorXd second_stage(const JointCondMean& jm, const Eigen::VectorXd& q_fit,
                             const Eigen::MatrixXd& feats_pred) {
  const Eigen::VectorXd coef = jm.ginv * (jm.b.transpose() * q_fit);
  return readoff_design(jm, feats_pred) * coef;
}

Eigen::VectorXd marg_exact(const JointCondMean& jm, const Eigen::MatrixXd& feats_pred, Keep keep) {
  const std::map<std::vector<double>, double>* cells = nullptr;
  switch (keep) {
    case Keep::ijs: cells = &jm.cells_ijs; break;
    case Keep::is: cells = &jm.cells_is; break;
    case Keep::js: cells = &jm.cells_js; break;
    case Keep::s: cells = &jm.cells_s; break;
  }
  Eigen::VectorXd out(feats_pred.rows());
  for (Eigen::Index r = 0; r < feats_pred.rows(); ++r) {
    const auto it = cells->find(cell_key(feats_pred, r, keep));
    out(r) = it == cells->end() ? jm.grand_mean : it->second;
  }
  return out;
}

Eigen::VectorXd marg_core(const JointCondMean& jm, const Eigen::MatrixXd& feats_pred, Keep keep) {
  if (jm.policy == CondMeanPolicy::exact_discrete) return marg_exact(jm, feats_pred, keep);
  if (keep == Keep::ijs) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(feats_pred.rows());
    for (int ci = 0; ci < static_cast<int>(jm.joint.weights.size()); ++ci)
      if (jm.joint.weights(ci) != 0.0)
        out += jm.joint.weights(ci) * predict(jm.joint.models[ci], feats_pred);
    return out;
  }
  if (keep == Keep::s) {
    const Eigen::VectorXd q_fit = marg_core(jm, jm.feats, Keep::js);
    return second_stage(jm, q_fit, feats_pred);
  }
  if (!jm.force_generic && can_factorize(jm)) return marg_factorized(jm, feats_pred, keep);
  return marg_reference_feats(jm, feats_pred, keep, jm.jobs);
}

}  // namespace

CondMeanConfig default_cond_mean_config(std::uint64_t seed) {
  CondMeanConfig cfg;
  cfg.policy = CondMeanPolicy::ensemble;
  cfg.seed = seed;
  cfg.learners.with_plain_glm = false;
  cfg.learners.with_pairwise_glm = true;
  cfg.learners.with_knn = false;
  cfg.learners.with_boost = true;
  cfg.learners.boost_depth = 2;
  cfg.learners.boost_rounds = 200;
  cfg.learners.boost_rate = 0.1;
  // simplex stacking keeps the flexible member active alongside the GLM;
  // discrete selection would collapse to the GLM on noisy targets and
  // forfeit most of the attainable variance reduction
  cfg.learners.stacking = true;
  return cfg;
}

Eigen::MatrixXd joint_features(const Eigen::MatrixXd& x, const CiConstraint& c) {
  const int p = static_cast<int>(x.cols());
  if (c.i < 0 || c.j < 0 || c.i >= p || c.j >= p)
    throw SchemaError("constraint endpoint index out of range for data");
  Eigen::MatrixXd f(x.rows(), 2 + c.cond.size());
  f.col(0) = x.col(c.i);
  f.col(1) = x.col(c.j);
  for (std::size_t s = 0; s < c.cond.size(); ++s) {
    if (c.cond[s] < 0 || c.cond[s] >= p)
      throw SchemaError("constraint conditioning index out of range for data");
    f.col(2 + s) = x.col(c.cond[s]);
  }
  return f;
}

JointCondMean fit_joint_cond_mean(const Eigen::VectorXd& phi_fit, const Eigen::MatrixXd& x_fit,
                                  const CiConstraint& c, const CondMeanConfig& cfg,
                                  std::uint64_t salt) {
  if (phi_fit.size() != x_fit.rows()) throw DomainError("fit_joint_cond_mean: shape mismatch");
  if (phi_fit.size() == 0) throw DomainError("fit_joint_cond_mean: empty fit sample");
  JointCondMean jm;
  jm.policy = cfg.policy;
  jm.c = c;
  jm.n_fit = static_cast<int>(phi_fit.size());
  jm.feats = joint_features(x_fit, c);
  jm.phi = phi_fit;
  jm.grand_mean = phi_fit.mean();
  jm.force_generic = cfg.force_generic_eval;
  jm.jobs = cfg.jobs;

  if (cfg.policy == CondMeanPolicy::exact_discrete) {
    for (Eigen::Index col = 0; col < jm.feats.cols(); ++col) {
      std::set<double> levels;
      for (Eigen::Index r = 0; r < jm.feats.rows(); ++r) levels.insert(jm.feats(r, col));
      if (static_cast<int>(levels.size()) > cfg.max_exact_levels)
        throw DomainError("exact-discrete policy: covariate in constraint has " +
                          std::to_string(levels.size()) + " levels (max " +
                          std::to_string(cfg.max_exact_levels) + ")");
    }
    jm.cells_ijs = group_means(jm.feats, jm.phi, Keep::ijs);
    jm.cells_is = group_means(jm.feats, jm.phi, Keep::is);
    jm.cells_js = group_means(jm.feats, jm.phi, Keep::js);
    jm.cells_s = group_means(jm.feats, jm.phi, Keep::s);
    return jm;
  }

  jm.joint = fit_ensemble(jm.feats, jm.phi, Task::regression, cfg.learners,
                          SeedTree(cfg.seed).child(salt).key());
  const int s_count = static_cast<int>(jm.feats.cols()) - 2;
  jm.b.resize(jm.n_fit, 1 + s_count);
  jm.b.col(0).setOnes();
  for (int s = 0; s < s_count; ++s) jm.b.col(1 + s) = jm.feats.col(2 + s);
  Eigen::MatrixXd g = jm.b.transpose() * jm.b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const double max_eig = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(1.0, max_eig)) {
    // singular read-off design (constant or collinear X_S): ridge fallback
    g.diagonal().tail(s_count).array() += 1e-8 * std::max(1.0, max_eig);
    jm.ridge_fallback = true;
  }
  jm.ginv = g.inverse();
  return jm;
}

Eigen::VectorXd marginalize_cond_mean(const JointCondMean& jm, const Eigen::MatrixXd& x_pred,
                                      Keep keep) {
  return marg_core(jm, joint_features(x_pred, jm.c), keep);
}

Eigen::VectorXd marginalize_reference(const JointCondMean& jm, const Eigen::MatrixXd& x_pred,
                                      Keep keep, int jobs) {
  if (jm.policy == CondMeanPolicy::exact_discrete)
    return marg_exact(jm, joint_features(x_pred, jm.c), keep);
  const Eigen::MatrixXd feats_pred = joint_features(x_pred, jm.c);
  if (keep == Keep::ijs) {
    Eigen::VectorXd out(feats_pred.rows());
    for (Eigen::Index r = 0; r < feats_pred.rows(); ++r)
      out(r) = ens_predict_one(jm.joint, feats_pred.row(r));
    return out;
  }
  if (keep == Keep::s) {
    const Eigen::VectorXd q_fit = marg_reference_feats(jm, jm.feats, Keep::js, jobs);
    return second_stage(jm, q_fit, feats_pred);
  }
  return marg_reference_feats(jm, feats_pred, keep, jobs);
}

bool can_factorize(const JointCondMean& jm) {
  if (jm.policy == CondMeanPolicy::exact_discrete) return false;
  for (int ci = 0; ci < static_cast<int>(jm.joint.weights.size()); ++ci)
    if (jm.joint.weights(ci) != 0.0 && !model_factorizable(jm.joint.models[ci])) return false;
  return true;
}

namespace {

Eigen::VectorXd project_step(const Eigen::VectorXd& phi_all, const Eigen::MatrixXd& x_all,
                             int n_fit, const CiConstraint& c, const CondMeanConfig& cfg,
                             std::uint64_t salt) {
  const JointCondMean jm =
      fit_joint_cond_mean(phi_all.head(n_fit), x_all.topRows(n_fit), c, cfg, salt);
  const Eigen::MatrixXd feats_all = joint_features(x_all, jm.c);
  const Eigen::VectorXd e_ijs = marg_core(jm, feats_all, Keep::ijs);
  const Eigen::VectorXd e_is = marg_core(jm, feats_all, Keep::is);
  const Eigen::VectorXd e_js = marg_core(jm, feats_all, Keep::js);
  Eigen::VectorXd e_s;
  if (jm.policy == CondMeanPolicy::exact_discrete) {
    e_s = marg_exact(jm, feats_all, Keep::s);
  } else {
    e_s = second_stage(jm, e_js.head(n_fit), feats_all);
  }
  return phi_all - e_ijs + e_is + e_js - e_s;
}

ProjectionResult alternating_core(Eigen::VectorXd phi, const Eigen::MatrixXd& x, int n_fit,
                                  int apply_begin, const std::vector<CiConstraint>& cs,
                                  const CondMeanConfig& cfg, double eps, int max_sweeps) {
  if (phi.size() != x.rows()) throw DomainError("alternating_project: shape mismatch");
  if (eps <= 0.0) throw DomainError("alternating_project: eps must be > 0");
  if (max_sweeps < 1) throw DomainError("alternating_project: max_sweeps must be >= 1");
  const int n_all = static_cast<int>(phi.size());
  const int m_count = static_cast<int>(cs.size());

  ProjectionResult res;
  res.var_before = pop_var(phi.tail(n_all - apply_begin));
  if (m_count == 0) {
    res.projected = phi.tail(n_all - apply_begin);
    res.var_after = res.var_before;
    res.converged = true;
    return res;
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Eigen::VectorXd prev = phi;
    for (int m = 0; m < m_count; ++m) {
      const std::uint64_t salt = static_cast<std::uint64_t>(sweep) * m_count + m;
      phi = project_step(phi, x, n_fit, cs[m], cfg, salt);
    }
    res.delta_history.push_back((phi - prev).squaredNorm() / n_all);
    if (!std::isfinite(res.delta_history.back()))
      throw EstimationError("alternating_project: non-finite sweep delta (sweep " +
                            std::to_string(sweep + 1) + ")");
    // one projection lands inside a single constraint set already
    if (m_count == 1 || res.delta_history.back() <= eps) {
      res.converged = true;
      break;
    }
  }
  res.sweeps = static_cast<int>(res.delta_history.size());
  res.projected = phi.tail(n_all - apply_begin);
  res.var_after = pop_var(res.projected);
  return res;
}

}  // namespace

Eigen::VectorXd project_single(const Eigen::VectorXd& phi, const Eigen::MatrixXd& x,
                               const CiConstraint& c, const CondMeanConfig& cfg) {
  return project_step(phi, x, static_cast<int>(phi.size()), c, cfg, 0);
}

ProjectionResult alternating_project(const Eigen::VectorXd& phi, const Eigen::MatrixXd& x,
                                     const std::vector<CiConstraint>& cs,
                                     const CondMeanConfig& cfg, double eps, int max_sweeps) {
  return alternating_core(phi, x, static_cast<int>(phi.size()), 0, cs, cfg, eps, max_sweeps);
}

ProjectionResult alternating_project_split(const Eigen::VectorXd& phi_fit,
                                           const Eigen::MatrixXd& x_fit,
                                           const Eigen::VectorXd& phi_apply,
                                           const Eigen::MatrixXd& x_apply,
                                           const std::vector<CiConstraint>& cs,
                                           const CondMeanConfig& cfg, double eps,
                                           int max_sweeps) {
  if (x_fit.cols() != x_apply.cols())
    throw DomainError("alternating_project_split: column mismatch");
  const int nf = static_cast<int>(phi_fit.size()), na = static_cast<int>(phi_apply.size());
  Eigen::VectorXd phi(nf + na);
  phi << phi_fit, phi_apply;
  Eigen::MatrixXd x(nf + na, x_fit.cols());
  x << x_fit, x_apply;
  return alternating_core(std::move(phi), x, nf, nf, cs, cfg, eps, max_sweeps);
}

VarianceGain variance_gain(const Eigen::VectorXd& phi, const Eigen::MatrixXd& x,
                           const CiConstraint& c, const CondMeanConfig& cfg) {
  const JointCondMean jm = fit_joint_cond_mean(phi, x, c, cfg, 0);
  const Eigen::MatrixXd feats = joint_features(x, c);
  const Eigen::VectorXd e_ijs = marg_core(jm, feats, Keep::ijs);
  const Eigen::VectorXd e_is = marg_core(jm, feats, Keep::is);
  const Eigen::VectorXd e_js = marg_core(jm, feats, Keep::js);
  const Eigen::VectorXd e_s = jm.policy == CondMeanPolicy::exact_discrete
                                  ? marg_exact(jm, feats, Keep::s)
                                  : second_stage(jm, e_js, feats);
  const Eigen::VectorXd after = phi - e_ijs + e_is + e_js - e_s;
  VarianceGain vg;
  vg.var_before = pop_var(phi);
  vg.var_after = pop_var(after);
  vg.joint_gain = pop_var(e_ijs) - pop_var(e_is) - pop_var(e_js);
  return vg;
}

}  // namespace ifproj
