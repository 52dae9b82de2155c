#include "ifproj/mc.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "ifproj/errors.hpp"
#include "ifproj/parallel.hpp"
#include "ifproj/rng.hpp"
#include "ifproj/stats.hpp"

namespace ifproj {

namespace {

constexpr std::uint64_t kLabelDraw = 1;
constexpr std::uint64_t kLabelEstimate = 2;
constexpr std::uint64_t kLabelOvbProject = 3;

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd draw_normals(CounterRng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.next_normal();
  return v;
}

}  // namespace

McKind parse_mc_kind(const std::string& s) {
  if (s == "example1") return McKind::example1;
  if (s == "example2") return McKind::example2;
  if (s == "misspec") return McKind::misspec;
  if (s == "ovb") return McKind::ovb;
  throw SchemaError("unknown experiment kind '" + s +
                    "' (expected example1, example2, misspec, or ovb)");
}

std::string mc_kind_name(McKind kind) {
  switch (kind) {
    case McKind::example1: return "example1";
    case McKind::example2: return "example2";
    case McKind::misspec: return "misspec";
    case McKind::ovb: return "ovb";
  }
  return "?";
}

McDraw mc_generate(McKind kind, int n, std::uint64_t seed) {
  if (n < 10) throw DomainError("mc_generate needs n >= 10");
  CounterRng rng = SeedTree(seed).rng();
  Eigen::MatrixXd x(n, 4);
  McTruth truth;

  if (kind == McKind::example1 || kind == McKind::misspec || kind == McKind::ovb) {
    if (kind == McKind::misspec) {
      x.col(0) = draw_normals(rng, n);
      const Eigen::VectorXd e2 = 0.5 * draw_normals(rng, n);
      for (int i = 0; i < n; ++i) x(i, 1) = x(i, 0) + e2(i) >= 0.0 ? 1.0 : 0.0;
      const Eigen::VectorXd e3 = draw_normals(rng, n);
      x.col(2) = (-0.5 + 2.0 * x.col(0).array() + x.col(1).array() + e3.array()).matrix();
    } else {
      x.col(0) = draw_normals(rng, n);
      for (int i = 0; i < n; ++i) x(i, 1) = rng.next_bernoulli(0.5) ? 1.0 : 0.0;
      const Eigen::VectorXd e3 = draw_normals(rng, n);
      x.col(2) = (-0.5 + x.col(1).array() + e3.array()).matrix();
    }
    const Eigen::VectorXd e4 = draw_normals(rng, n);
    x.col(3) = (1.5 * x.col(0).array() * x.col(1).array() + e4.array()).matrix();
    truth.u = draw_normals(rng, n);
    truth.lin_t.resize(n);
    for (int i = 0; i < n; ++i)
      truth.lin_t(i) = x(i, 0) * x(i, 1) + x(i, 0) * x(i, 2) + x(i, 1) * x(i, 2) * x(i, 3) +
                       0.2 * truth.u(i);
  } else {  // example2: x2 and x4 share the latent u
    truth.u = draw_normals(rng, n);
    x.col(0) = draw_normals(rng, n);
    const Eigen::VectorXd e2 = draw_normals(rng, n);
    x.col(1) = (-0.5 + x.col(0).array() + 1.5 * truth.u.array() + e2.array()).matrix();
    x.col(2) = draw_normals(rng, n);
    const Eigen::VectorXd e4 = draw_normals(rng, n);
    x.col(3) = (-0.5 + x.col(2).array() + 2.0 * truth.u.array() + e4.array()).matrix();
    truth.lin_t.resize(n);
    for (int i = 0; i < n; ++i)
      truth.lin_t(i) = x(i, 0) * x(i, 2) + x(i, 0) * x(i, 1) * x(i, 2) +
                       x(i, 0) * x(i, 2) * x(i, 3);
  }

  Eigen::VectorXi t(n);
  for (int i = 0; i < n; ++i) t(i) = rng.next_bernoulli(expit(truth.lin_t(i))) ? 1 : 0;

  Eigen::VectorXd y(n);
  truth.lin_y.resize(n);
  if (kind == McKind::ovb) {
    for (int i = 0; i < n; ++i) {
      truth.lin_y(i) = t(i) * truth.lin_t(i);
      y(i) = truth.lin_y(i) + 0.5 * rng.next_normal();
    }
  } else {
    for (int i = 0; i < n; ++i) {
      truth.lin_y(i) = t(i) * truth.lin_t(i);
      y(i) = rng.next_bernoulli(expit(truth.lin_y(i))) ? 1.0 : 0.0;
    }
  }

  McDraw draw;
  draw.data = make_dataset(std::move(x), std::move(t), std::move(y), {"x1", "x2", "x3", "x4"});
  draw.truth = std::move(truth);
  return draw;
}

std::vector<CiConstraint> builtin_constraints(McKind kind) {
  if (kind == McKind::example2)
    return {CiConstraint{0, 2, {}}, CiConstraint{0, 3, {2}}, CiConstraint{1, 2, {0}}};
  // example1's structure; reused verbatim (and knowingly wrong) by misspec
  return {CiConstraint{0, 1, {}}, CiConstraint{0, 2, {}}, CiConstraint{2, 3, {1}}};
}

McConfig default_mc_config(McKind kind) {
  McConfig cfg;
  cfg.kind = kind;
  cfg.nuisance = default_nuisance_config();
  cfg.ovb = default_ovb_config();
  cfg.cond = default_cond_mean_config();
  // fold-local conditional-mean fits: at these sample sizes the split
  // alternative leaves the realized fold noise untouched and the projected
  // variance barely moves; see ProjectionSpec::fit_in_fold
  cfg.project_in_fold = true;
  switch (kind) {
    case McKind::example1:
      cfg.n = 1000;
      break;
    case McKind::example2:
    case McKind::misspec:
      cfg.n = 500;
      break;
    case McKind::ovb:
      cfg.n = 500;
      cfg.max_sweeps = 1;  // this constraint set factorizes; one sweep is exact
      break;
  }
  return cfg;
}

namespace {

struct SlotLayout {
  std::vector<double> params;
  std::vector<std::string> variants;  // per param
  int per_param = 0;
  int total() const { return static_cast<int>(params.size()) * per_param; }
};

SlotLayout make_layout(const McConfig& cfg) {
  SlotLayout lay;
  if (cfg.kind == McKind::ovb) {
    lay.params = cfg.eta2s;
    lay.variants = {"nonparametric:lo", "nonparametric:hi"};
    if (cfg.with_projection) {
      lay.variants.push_back("projected:lo");
      lay.variants.push_back("projected:hi");
    }
  } else {
    lay.params = cfg.gammas;
    lay.variants = {"nonparametric"};
    if (cfg.with_projection) lay.variants.push_back("projected");
  }
  lay.per_param = static_cast<int>(lay.variants.size());
  return lay;
}

}  // namespace

McReport run_mc(const McConfig& cfg) {
  if (cfg.reps < 1) throw DomainError("run_mc needs reps >= 1");
  if (cfg.kind == McKind::ovb) {
    if (cfg.eta2s.empty()) throw DomainError("run_mc: empty eta2 grid");
  } else if (cfg.gammas.empty()) {
    throw DomainError("run_mc: empty gamma grid");
  }
  const auto t0 = std::chrono::steady_clock::now();

  const SlotLayout lay = make_layout(cfg);
  const int n_slots = lay.total();
  const std::vector<CiConstraint> constraints =
      cfg.constraints.empty() ? builtin_constraints(cfg.kind) : cfg.constraints;

  std::vector<std::vector<double>> est(cfg.reps), varhat(cfg.reps);
  std::vector<char> failed(cfg.reps, 0);
  std::vector<std::string> messages(cfg.reps);
  std::vector<int> rep_sweeps(cfg.reps, 0);

  parallel_for(cfg.reps, cfg.jobs, [&](int rep) {
    est[rep].assign(n_slots, 0.0);
    varhat[rep].assign(n_slots, 0.0);
    try {
      const McDraw draw =
          mc_generate(cfg.kind, cfg.n, SeedTree(cfg.seed).child({kLabelDraw, (std::uint64_t)rep}).key());
      ProjectionSpec pspec;
      if (cfg.with_projection) pspec.constraints = constraints;
      pspec.cond = cfg.cond;
      pspec.eps = cfg.eps;
      pspec.max_sweeps = cfg.max_sweeps;
      pspec.fit_in_fold = cfg.project_in_fold;

      if (cfg.kind == McKind::ovb) {
        OvbConfig ocfg = cfg.ovb;
        ocfg.k_folds = cfg.k_folds;
        const std::uint64_t est_seed =
            SeedTree(cfg.seed).child({kLabelEstimate, (std::uint64_t)rep}).key();
        const OvbShortFit fit = ovb_short_fit(draw.data, ocfg, est_seed, 1);
        OvbProjection prj;
        if (cfg.with_projection) {
          prj = ovb_project(draw.data, fit, pspec,
                            SeedTree(cfg.seed).child({kLabelOvbProject, (std::uint64_t)rep}).key(),
                            1);
          for (int s : prj.sweeps) rep_sweeps[rep] = std::max(rep_sweeps[rep], s);
        }
        for (std::size_t pi = 0; pi < lay.params.size(); ++pi) {
          const double e2 = lay.params[pi];
          const OvbBoundRow base = ovb_bounds(fit, e2, e2, cfg.rho);
          double* e = est[rep].data() + pi * lay.per_param;
          double* v = varhat[rep].data() + pi * lay.per_param;
          e[0] = base.tau_lo;
          v[0] = base.var_lo;
          e[1] = base.tau_hi;
          v[1] = base.var_hi;
          if (cfg.with_projection) {
            const OvbBoundRow prow = ovb_bounds_projected(fit, prj, e2, e2, cfg.rho);
            e[2] = prow.tau_lo;
            v[2] = prow.var_lo;
            e[3] = prow.tau_hi;
            v[3] = prow.var_hi;
          }
        }
      } else {
        const SensitivityCurve curve = cross_fit_curve(
            draw.data, cfg.gammas, cfg.k_folds, cfg.nuisance, pspec,
            SeedTree(cfg.seed).child({kLabelEstimate, (std::uint64_t)rep}).key(), 1);
        for (const CurvePoint& pt : curve.points) {
          int gi = -1;
          for (std::size_t i = 0; i < lay.params.size(); ++i)
            if (lay.params[i] == pt.gamma) gi = static_cast<int>(i);
          const int slot = gi * lay.per_param + (pt.projected ? 1 : 0);
          est[rep][slot] = pt.tau;
          varhat[rep][slot] = pt.var_tau;
          rep_sweeps[rep] = std::max(rep_sweeps[rep], pt.max_sweeps_used);
        }
      }
    } catch (const std::exception& ex) {
      failed[rep] = 1;
      messages[rep] = ex.what();
    }
  });

  McReport report;
  report.reps_requested = cfg.reps;
  for (int rep = 0; rep < cfg.reps; ++rep) {
    if (failed[rep]) {
      ++report.failures;
      if (report.failure_notes.size() < 10)
        report.failure_notes.push_back("rep " + std::to_string(rep) + ": " + messages[rep]);
    } else {
      report.sweeps_max = std::max(report.sweeps_max, rep_sweeps[rep]);
      if (rep_sweeps[rep] > 1) report.any_multi_sweep = true;
    }
  }
  report.valid = report.failures <= cfg.max_failure_rate * cfg.reps;

  for (int slot = 0; slot < n_slots; ++slot) {
    McRow row;
    row.kind = mc_kind_name(cfg.kind);
    row.n = cfg.n;
    row.param = lay.params[slot / lay.per_param];
    row.variant = lay.variants[slot % lay.per_param];
    std::vector<double> es;
    double v_acc = 0.0;
    for (int rep = 0; rep < cfg.reps; ++rep) {
      if (failed[rep]) continue;
      es.push_back(est[rep][slot]);
      v_acc += varhat[rep][slot];
    }
    row.reps_ok = static_cast<int>(es.size());
    if (row.reps_ok > 0) {
      Eigen::Map<const Eigen::VectorXd> ev(es.data(), es.size());
      row.mean_est = ev.mean();
      row.mean_var = v_acc / row.reps_ok;
      row.mc_var = row.reps_ok >= 2 ? sample_var(ev) : 0.0;
    }
    report.rows.push_back(row);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string fmt_sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string table_csv(const McReport& rep) {
  std::string out = "kind,n,param,variant,mean_estimate,mean_variance,reps\n";
  for (const McRow& r : rep.rows) {
    out += r.kind + "," + std::to_string(r.n) + "," + fmt_sig(r.param, 6) + "," + r.variant +
           "," + fmt_sig(r.mean_est, 4) + "," + fmt_fixed(r.mean_var, 4) + "," +
           std::to_string(r.reps_ok) + "\n";
  }
  return out;
}

std::string table_markdown(const McReport& rep) {
  std::string out = "| kind | n | param | variant | estimate | variance | reps |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const McRow& r : rep.rows) {
    out += "| " + r.kind + " | " + std::to_string(r.n) + " | " + fmt_sig(r.param, 6) + " | " +
           r.variant + " | " + fmt_sig(r.mean_est, 4) + " | " + fmt_fixed(r.mean_var, 4) +
           " | " + std::to_string(r.reps_ok) + " |\n";
  }
  return out;
}

}  // namespace ifproj
