#include "ifproj/learners.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "ifproj/errors.hpp"
#include "ifproj/rng.hpp"

namespace ifproj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double expit(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow
double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double clip_prob(double p) { return std::min(kProbClipHi, std::max(kProbClipLo, p)); }

// intercept column plus (optionally pairwise-expanded) features
Eigen::MatrixXd design(const Eigen::MatrixXd& x, bool pairwise) {
  const Eigen::MatrixXd feats = pairwise ? expand_pairwise(x) : x;
  Eigen::MatrixXd z(feats.rows(), feats.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(feats.cols()) = feats;
  return z;
}

void check_binary(const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0)
      throw DomainError("logistic fit requires 0/1 labels, found " + std::to_string(y(i)));
}

}  // namespace

Eigen::MatrixXd expand_pairwise(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::MatrixXd out(n, p + p * (p - 1) / 2);
  out.leftCols(p) = x;
  Eigen::Index c = p;
  for (Eigen::Index f = 0; f < p; ++f)
    for (Eigen::Index g = f + 1; g < p; ++g) out.col(c++) = x.col(f).cwiseProduct(x.col(g));
  return out;
}

LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                       bool pairwise) {
  if (x.rows() != y.size() || x.rows() == 0) throw DomainError("fit_linear: shape mismatch");
  if (ridge < 0.0) throw DomainError("fit_linear: ridge must be >= 0");
  const Eigen::MatrixXd z = design(x, pairwise);
  LinearModel m;
  m.pairwise = pairwise;
  m.p_raw = static_cast<int>(x.cols());
  if (ridge > 0.0) {
    Eigen::MatrixXd a = z.transpose() * z;
    a.diagonal().tail(z.cols() - 1).array() += ridge;
    m.beta = a.ldlt().solve(z.transpose() * y);
    return m;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(z);
  m.beta = cod.solve(y);
  m.min_norm_fallback = cod.rank() < z.cols();
  return m;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                           int max_iter, double tol, bool pairwise) {
  if (x.rows() != y.size() || x.rows() == 0) throw DomainError("fit_logistic: shape mismatch");
  if (ridge < 0.0) throw DomainError("fit_logistic: ridge must be >= 0");
  check_binary(y);
  const Eigen::MatrixXd z = design(x, pairwise);
  const Eigen::Index d = z.cols();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  auto penalized_ll = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = z * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
    return ll - 0.5 * ridge * b.tail(d - 1).squaredNorm();
  };

  LogisticModel m;
  m.pairwise = pairwise;
  m.p_raw = static_cast<int>(x.cols());
  double cur = penalized_ll(beta);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = z * beta;
    Eigen::VectorXd p(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p(i) = expit(eta(i));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-10);
    }
    Eigen::VectorXd grad = z.transpose() * (y - p);
    grad.tail(d - 1) -= ridge * beta.tail(d - 1);
    Eigen::MatrixXd h = z.transpose() * w.asDiagonal() * z;
    h.diagonal().tail(d - 1).array() += ridge;
    Eigen::VectorXd step = h.ldlt().solve(grad);
    if (!step.allFinite()) break;

    // step halving keeps the penalized log-likelihood nondecreasing
    double next = -kInf;
    for (int half = 0; half < 40; ++half) {
      next = penalized_ll(beta + step);
      if (next >= cur) break;
      step *= 0.5;
    }
    if (next < cur) break;  // no uphill step available at this scale
    beta += step;
    m.iterations = it + 1;
    const bool done = std::abs(next - cur) / (std::abs(next) + 0.1) <= tol;
    cur = next;
    if (done) {
      m.converged = true;
      break;
    }
  }
  m.beta = std::move(beta);
  return m;
}

KnnModel fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k) {
  if (x.rows() != y.size() || x.rows() == 0) throw DomainError("fit_knn: shape mismatch");
  if (k < 1 || k > x.rows())
    throw DomainError("fit_knn: k=" + std::to_string(k) + " outside [1, n=" +
                      std::to_string(x.rows()) + "]");
  KnnModel m;
  m.k = k;
  m.center = x.colwise().mean();
  m.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - m.center(j)).square().mean();
    m.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  m.xs = (x.rowwise() - m.center.transpose()).array().rowwise() / m.scale.transpose().array();
  m.ys = y;
  return m;
}

namespace {

double knn_predict_one(const KnnModel& m, const Eigen::RowVectorXd& x) {
  const Eigen::RowVectorXd q =
      (x - m.center.transpose()).array() / m.scale.transpose().array();
  const Eigen::Index n = m.xs.rows();
  std::vector<std::pair<double, int>> d(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d[i] = {(m.xs.row(i) - q).squaredNorm(), static_cast<int>(i)};
  std::nth_element(d.begin(), d.begin() + (m.k - 1), d.end());
  // gather the k chosen indices, then sum in index order for determinism
  std::vector<int> idx(m.k);
  for (int i = 0; i < m.k; ++i) idx[i] = d[i].second;
  std::sort(idx.begin(), idx.end());
  double s = 0.0;
  for (int i : idx) s += m.ys(i);
  return s / m.k;
}

// cell index = number of thresholds strictly below x, so "cell <= s" means
// x <= thresholds[s]
int cell_of(const std::vector<double>& thr, double x) {
  int c = 0;
  while (c < static_cast<int>(thr.size()) && thr[c] < x) ++c;
  return c;
}

std::vector<double> split_candidates(const Eigen::VectorXd& col, int bins) {
  std::vector<double> v(col.data(), col.data() + col.size());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  const int m = static_cast<int>(v.size());
  std::vector<double> thr;
  if (m < 2) return thr;
  if (m - 1 <= bins) {
    for (int i = 0; i + 1 < m; ++i) thr.push_back(0.5 * (v[i] + v[i + 1]));
    return thr;
  }
  for (int t = 0; t < bins; ++t) {
    const int i = static_cast<int>(static_cast<long long>(t + 1) * (m - 1) / (bins + 1));
    thr.push_back(0.5 * (v[i] + v[i + 1]));
  }
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  return thr;
}

}  // namespace

BoostModel fit_boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int rounds, double rate,
                     int depth, int bins) {
  if (x.rows() != y.size() || x.rows() == 0) throw DomainError("fit_boost: shape mismatch");
  if (rounds < 1 || rate <= 0.0 || rate > 1.0) throw DomainError("fit_boost: bad rounds/rate");
  if (depth != 1 && depth != 2) throw DomainError("fit_boost: depth must be 1 or 2");
  if (bins < 2) throw DomainError("fit_boost: bins must be >= 2");
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());

  BoostModel model;
  model.depth = depth;
  model.rate = rate;
  model.base = y.mean();
  Eigen::VectorXd r = y.array() - model.base;

  // per-feature candidate thresholds and per-unit cell indices, computed once
  std::vector<std::vector<double>> thr(p);
  std::vector<std::vector<int>> cell(p);
  for (int f = 0; f < p; ++f) {
    thr[f] = split_candidates(x.col(f), bins);
    cell[f].resize(n);
    for (int i = 0; i < n; ++i) cell[f][i] = cell_of(thr[f], x(i, f));
  }

  for (int round = 0; round < rounds; ++round) {
    const double total = r.sum();
    const double base_score = total * total / n;
    double best_gain = 0.0;
    BoostTree best;
    bool found = false;

    // depth-1: single-feature split
    for (int f = 0; f < p; ++f) {
      const int m = static_cast<int>(thr[f].size());
      if (m == 0) continue;
      std::vector<double> sum(m + 1, 0.0);
      std::vector<int> cnt(m + 1, 0);
      for (int i = 0; i < n; ++i) {
        sum[cell[f][i]] += r(i);
        ++cnt[cell[f][i]];
      }
      double sl = 0.0;
      int nl = 0;
      for (int s = 0; s < m; ++s) {
        sl += sum[s];
        nl += cnt[s];
        if (nl == 0 || nl == n) continue;
        const double sr = total - sl;
        const double gain = sl * sl / nl + sr * sr / (n - nl) - base_score;
        if (gain > best_gain + 1e-14) {
          best_gain = gain;
          best = BoostTree{f, thr[f][s], -1, 0.0, {{0, 0}, {0, 0}}};
          best.leaf[0][0] = sl / nl;
          best.leaf[1][0] = sr / (n - nl);
          found = true;
        }
      }
    }

    // depth-2: 4-leaf split on a feature pair via 2d prefix sums
    if (depth == 2) {
      for (int a = 0; a < p; ++a) {
        const int ma = static_cast<int>(thr[a].size());
        if (ma == 0) continue;
        for (int b = a + 1; b < p; ++b) {
          const int mb = static_cast<int>(thr[b].size());
          if (mb == 0) continue;
          Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(ma + 1, mb + 1);
          Eigen::MatrixXi cnt = Eigen::MatrixXi::Zero(ma + 1, mb + 1);
          for (int i = 0; i < n; ++i) {
            sum(cell[a][i], cell[b][i]) += r(i);
            cnt(cell[a][i], cell[b][i]) += 1;
          }
          for (int u = 0; u <= ma; ++u)
            for (int v = 1; v <= mb; ++v) {
              sum(u, v) += sum(u, v - 1);
              cnt(u, v) += cnt(u, v - 1);
            }
          for (int v = 0; v <= mb; ++v)
            for (int u = 1; u <= ma; ++u) {
              sum(u, v) += sum(u - 1, v);
              cnt(u, v) += cnt(u - 1, v);
            }
          for (int sa = 0; sa < ma; ++sa)
            for (int sb = 0; sb < mb; ++sb) {
              const double sll = sum(sa, sb);
              const double slr = sum(sa, mb) - sll;
              const double srl = sum(ma, sb) - sll;
              const double srr = total - sll - slr - srl;
              const int nll = cnt(sa, sb);
              const int nlr = cnt(sa, mb) - nll;
              const int nrl = cnt(ma, sb) - nll;
              const int nrr = n - nll - nlr - nrl;
              double gain = -base_score;
              if (nll > 0) gain += sll * sll / nll;
              if (nlr > 0) gain += slr * slr / nlr;
              if (nrl > 0) gain += srl * srl / nrl;
              if (nrr > 0) gain += srr * srr / nrr;
              if (gain > best_gain + 1e-14) {
                best_gain = gain;
                best = BoostTree{a, thr[a][sa], b, thr[b][sb], {{0, 0}, {0, 0}}};
                best.leaf[0][0] = nll > 0 ? sll / nll : 0.0;
                best.leaf[0][1] = nlr > 0 ? slr / nlr : 0.0;
                best.leaf[1][0] = nrl > 0 ? srl / nrl : 0.0;
                best.leaf[1][1] = nrr > 0 ? srr / nrr : 0.0;
                found = true;
              }
            }
        }
      }
    }

    if (!found || best_gain <= 1e-12 * (r.squaredNorm() / n + 1e-300)) break;
    for (auto& row : best.leaf)
      for (auto& v : row) v *= rate;
    for (int i = 0; i < n; ++i) {
      const int ia = x(i, best.fa) <= best.ta ? 0 : 1;
      const int ib = best.fb < 0 ? 0 : (x(i, best.fb) <= best.tb ? 0 : 1);
      r(i) -= best.leaf[ia][ib];
    }
    model.trees.push_back(best);
  }
  return model;
}

namespace {

double boost_predict_one(const BoostModel& m, const Eigen::RowVectorXd& x) {
  double v = m.base;
  for (const auto& t : m.trees) {
    const int ia = x(t.fa) <= t.ta ? 0 : 1;
    const int ib = t.fb < 0 ? 0 : (x(t.fb) <= t.tb ? 0 : 1);
    v += t.leaf[ia][ib];
  }
  return v;
}

double model_predict_one(const Model& m, const Eigen::RowVectorXd& x) {
  double v = 0.0;
  if (const auto* lin = std::get_if<LinearModel>(&m.impl)) {
    Eigen::MatrixXd row = x;
    const Eigen::MatrixXd z = design(row, lin->pairwise);
    v = (z * lin->beta)(0);
  } else if (const auto* log = std::get_if<LogisticModel>(&m.impl)) {
    Eigen::MatrixXd row = x;
    const Eigen::MatrixXd z = design(row, log->pairwise);
    v = expit((z * log->beta)(0));
  } else if (const auto* knn = std::get_if<KnnModel>(&m.impl)) {
    v = knn_predict_one(*knn, x);
  } else {
    v = boost_predict_one(std::get<BoostModel>(m.impl), x);
  }
  if (m.task == Task::probability) v = clip_prob(v);
  return v;
}

}  // namespace

Eigen::VectorXd predict(const Model& m, const Eigen::MatrixXd& x) {
  // linear/logistic vectorize cleanly; knn/boost go row by row
  if (const auto* lin = std::get_if<LinearModel>(&m.impl)) {
    Eigen::VectorXd v = design(x, lin->pairwise) * lin->beta;
    if (m.task == Task::probability)
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = clip_prob(v(i));
    return v;
  }
  if (const auto* log = std::get_if<LogisticModel>(&m.impl)) {
    Eigen::VectorXd v = design(x, log->pairwise) * log->beta;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v(i) = expit(v(i));
      if (m.task == Task::probability) v(i) = clip_prob(v(i));
    }
    return v;
  }
  Eigen::VectorXd v(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) v(i) = model_predict_one(m, x.row(i));
  return v;
}

double predict_one(const Model& m, const Eigen::RowVectorXd& x) { return model_predict_one(m, x); }

namespace {

struct CandidateSpec {
  std::string label;
  std::function<Model(const Eigen::MatrixXd&, const Eigen::VectorXd&)> fit;
};

std::vector<CandidateSpec> build_candidates(Task task, const EnsembleConfig& cfg) {
  std::vector<CandidateSpec> cands;
  const bool prob = task == Task::probability;
  auto glm = [&](bool pairwise, const std::string& label) {
    cands.push_back({label, [=, &cfg](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
                       Model m;
                       m.task = task;
                       m.label = label;
                       if (prob)
                         m.impl = fit_logistic(x, y, cfg.ridge, cfg.logit_max_iter, cfg.logit_tol,
                                               pairwise);
                       else
                         m.impl = fit_linear(x, y, cfg.ridge, pairwise);
                       return m;
                     }});
  };
  if (cfg.with_plain_glm) glm(false, prob ? "logistic" : "linear");
  if (cfg.with_pairwise_glm) glm(true, prob ? "logistic_pair" : "linear_pair");
  if (cfg.with_knn)
    for (int k : cfg.knn_k) {
      const std::string label = "knn" + std::to_string(k);
      cands.push_back({label, [=](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
                         Model m;
                         m.task = task;
                         m.label = label;
                         m.impl = fit_knn(x, y, k);
                         return m;
                       }});
    }
  if (cfg.with_boost) {
    const std::string label = "boost" + std::to_string(cfg.boost_depth);
    cands.push_back({label, [=, &cfg](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
                       Model m;
                       m.task = task;
                       m.label = label;
                       m.impl = fit_boost(x, y, cfg.boost_rounds, cfg.boost_rate, cfg.boost_depth,
                                          cfg.boost_bins);
                       return m;
                     }});
  }
  return cands;
}

// simplex-constrained least squares by Frank-Wolfe; deterministic and plenty
// accurate for a handful of candidates
Eigen::VectorXd simplex_weights(const Eigen::MatrixXd& preds, const Eigen::VectorXd& y,
                                const std::vector<bool>& ok) {
  const int c = static_cast<int>(preds.cols());
  std::vector<int> live;
  for (int i = 0; i < c; ++i)
    if (ok[i]) live.push_back(i);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(c);
  for (int i : live) w(i) = 1.0 / live.size();
  for (int it = 1; it <= 2000; ++it) {
    const Eigen::VectorXd grad = 2.0 * preds.transpose() * (preds * w - y) / y.size();
    int s = live[0];
    for (int i : live)
      if (grad(i) < grad(s)) s = i;
    const double step = 2.0 / (it + 2.0);
    w *= 1.0 - step;
    w(s) += step;
  }
  return w;
}

}  // namespace

Ensemble fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Task task,
                      const EnsembleConfig& cfg, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  if (n < 4) throw DomainError("fit_ensemble: need at least 4 rows");
  if (x.rows() != y.size()) throw DomainError("fit_ensemble: shape mismatch");
  const auto cands = build_candidates(task, cfg);
  if (cands.empty()) throw DomainError("fit_ensemble: no candidates enabled");
  const int c = static_cast<int>(cands.size());
  const int folds = std::max(2, std::min(cfg.cv_folds, n));

  // seeded shuffle then round-robin fold labels
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  SeedTree tree(seed);
  auto rng = tree.child(0x9c).rng();
  rng.shuffle(order);
  std::vector<int> fold(n);
  for (int i = 0; i < n; ++i) fold[order[i]] = i % folds;

  Ensemble e;
  e.task = task;
  e.cv_risks = Eigen::VectorXd::Constant(c, kInf);
  Eigen::MatrixXd oof = Eigen::MatrixXd::Zero(n, c);
  std::vector<bool> ok(c, true);

  for (int ci = 0; ci < c; ++ci) {
    try {
      for (int f = 0; f < folds; ++f) {
        std::vector<int> tr, te;
        for (int i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(i);
        Eigen::MatrixXd xt(tr.size(), x.cols()), xe(te.size(), x.cols());
        Eigen::VectorXd yt(tr.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
          xt.row(i) = x.row(tr[i]);
          yt(i) = y(tr[i]);
        }
        for (std::size_t i = 0; i < te.size(); ++i) xe.row(i) = x.row(te[i]);
        const Model m = cands[ci].fit(xt, yt);
        const Eigen::VectorXd pv = predict(m, xe);
        for (std::size_t i = 0; i < te.size(); ++i) oof(te[i], ci) = pv(i);
      }
      double risk = 0.0;
      if (task == Task::probability) {
        for (int i = 0; i < n; ++i) {
          const double p = clip_prob(oof(i, ci));
          risk -= y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p);
        }
      } else {
        risk = (y - oof.col(ci)).squaredNorm();
      }
      e.cv_risks(ci) = risk / n;
      if (!std::isfinite(e.cv_risks(ci))) throw EstimationError("non-finite cv risk");
    } catch (const std::exception& ex) {
      ok[ci] = false;
      e.cv_risks(ci) = kInf;
      e.warnings.push_back("candidate '" + cands[ci].label + "' dropped: " + ex.what());
    }
  }
  if (std::none_of(ok.begin(), ok.end(), [](bool b) { return b; }))
    throw EstimationError("fit_ensemble: every candidate failed cross-validation");

  e.selected = 0;
  for (int ci = 1; ci < c; ++ci)
    if (e.cv_risks(ci) < e.cv_risks(e.selected)) e.selected = ci;

  e.weights = Eigen::VectorXd::Zero(c);
  if (cfg.stacking) {
    e.stacked = true;
    e.weights = simplex_weights(oof, y, ok);
  } else {
    e.weights(e.selected) = 1.0;
  }

  // final refit on all rows for every candidate that carries weight
  e.models.resize(c);
  for (int ci = 0; ci < c; ++ci) {
    if (!ok[ci] || e.weights(ci) == 0.0) continue;
    try {
      e.models[ci] = cands[ci].fit(x, y);
    } catch (const std::exception& ex) {
      if (ci == e.selected) throw;
      e.weights(ci) = 0.0;
      e.warnings.push_back("candidate '" + cands[ci].label + "' dropped at refit: " + ex.what());
    }
  }
  const double wsum = e.weights.sum();
  if (wsum <= 0.0) throw EstimationError("fit_ensemble: no usable candidate after refit");
  e.weights /= wsum;
  return e;
}

Eigen::VectorXd predict(const Ensemble& e, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (int ci = 0; ci < static_cast<int>(e.weights.size()); ++ci) {
    if (e.weights(ci) == 0.0) continue;
    out += e.weights(ci) * predict(e.models[ci], x);
  }
  if (e.task == Task::probability)
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = clip_prob(out(i));
  return out;
}

}  // namespace ifproj
