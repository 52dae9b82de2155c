#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "ifproj/errors.hpp"
#include "ifproj/mc.hpp"
#include "ifproj/stats.hpp"

using namespace ifproj;
using Eigen::VectorXd;

namespace {

// two-sided t statistic for zero correlation between two covariate columns
double corr_tstat(const Dataset& ds, int a, int b) {
  const double r = pearson(ds.x.col(a), ds.x.col(b));
  const double n = static_cast<double>(ds.n());
  return r * std::sqrt((n - 2.0) / (1.0 - r * r));
}

}  // namespace

TEST_CASE("kind names round trip and reject unknowns") {
  for (McKind k : {McKind::example1, McKind::example2, McKind::misspec, McKind::ovb})
    CHECK(parse_mc_kind(mc_kind_name(k)) == k);
  CHECK_THROWS_AS(parse_mc_kind("examples"), SchemaError);
}

TEST_CASE("draws are pinned by kind, size and seed") {
  const McDraw a = mc_generate(McKind::example1, 400, 7);
  const McDraw b = mc_generate(McKind::example1, 400, 7);
  CHECK(a.data.x == b.data.x);
  CHECK(a.data.t == b.data.t);
  CHECK(a.data.y == b.data.y);
  CHECK(a.truth.u == b.truth.u);

  const McDraw c = mc_generate(McKind::example1, 400, 8);
  CHECK(a.data.x != c.data.x);

  CHECK_THROWS_AS(mc_generate(McKind::example1, 5, 1), DomainError);
}

TEST_CASE("the latent confounder stays out of the exported dataset") {
  const McDraw d = mc_generate(McKind::example2, 100000, 3);
  CHECK(d.data.p() == 4);
  CHECK(d.data.names == std::vector<std::string>{"x1", "x2", "x3", "x4"});
  CHECK(d.truth.u.size() == 100000);
  // the confounder loads on x2 (coefficient 1.5 of sd sqrt(4.25)) and on
  // x4 (coefficient 2 of sd sqrt(6))
  CHECK(pearson(d.truth.u, d.data.x.col(1)) ==
        doctest::Approx(1.5 / std::sqrt(4.25)).epsilon(0.02));
  CHECK(pearson(d.truth.u, d.data.x.col(3)) ==
        doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(0.02));

  // in the first design the confounder sits in the treatment score directly
  const McDraw d1 = mc_generate(McKind::example1, 100000, 3);
  const double r = pearson(d1.truth.u, d1.truth.lin_t);
  CHECK(r * std::sqrt(100000.0) > 10.0);
}

TEST_CASE("first experiment satisfies its working independences") {
  const McDraw d = mc_generate(McKind::example1, 100000, 11);
  const Dataset& ds = d.data;
  // binary covariate frequency
  CHECK(ds.x.col(1).mean() == doctest::Approx(0.5).epsilon(0.02));
  // claimed independences hold: tiny correlations
  CHECK(std::abs(corr_tstat(ds, 0, 1)) < 3.0);   // x1 _||_ x2
  CHECK(std::abs(corr_tstat(ds, 0, 2)) < 3.0);   // x1 _||_ x3
  // dependent pairs are decisively dependent
  CHECK(std::abs(corr_tstat(ds, 1, 2)) > 10.0);  // x3 = f(x2, noise)
  CHECK(std::abs(corr_tstat(ds, 0, 3)) > 10.0);  // x4 = f(x1 x2, noise)
}

TEST_CASE("second experiment wires its confounder chain") {
  const McDraw d = mc_generate(McKind::example2, 100000, 12);
  const Dataset& ds = d.data;
  CHECK(std::abs(corr_tstat(ds, 0, 2)) < 3.0);  // x1 _||_ x3
  // x2 and x4 share the confounder; the implied correlation is strong
  const double r24 = pearson(ds.x.col(1), ds.x.col(3));
  CHECK(r24 > 0.45);
  CHECK(std::abs(corr_tstat(ds, 1, 3)) > 10.0);
}

TEST_CASE("misspecified experiment breaks the assumed independences") {
  const McDraw d = mc_generate(McKind::misspec, 100000, 13);
  const Dataset& ds = d.data;
  // x2 is a threshold of x1, x3 loads on x1 directly: the pairs the
  // projection assumes independent are anything but
  CHECK(std::abs(corr_tstat(ds, 0, 1)) > 10.0);
  CHECK(std::abs(corr_tstat(ds, 0, 2)) > 10.0);
  // x2 is binary
  for (int i = 0; i < 50; ++i)
    CHECK((ds.x(i, 1) == 0.0 || ds.x(i, 1) == 1.0));
}

TEST_CASE("builtin constraint sets match the experiment designs") {
  const auto c1 = builtin_constraints(McKind::example1);
  REQUIRE(c1.size() == 3);
  CHECK(c1[0] == canonical_constraint(0, 1, {}, 4));
  CHECK(c1[1] == canonical_constraint(0, 2, {}, 4));
  CHECK(c1[2] == canonical_constraint(2, 3, {1}, 4));
  CHECK(builtin_constraints(McKind::misspec) == c1);
  CHECK(builtin_constraints(McKind::ovb) == c1);

  const auto c2 = builtin_constraints(McKind::example2);
  REQUIRE(c2.size() == 3);
  CHECK(c2[0] == canonical_constraint(0, 2, {}, 4));
  CHECK(c2[1] == canonical_constraint(0, 3, {2}, 4));
  CHECK(c2[2] == canonical_constraint(1, 2, {0}, 4));
}

TEST_CASE("per-kind defaults carry the right shapes") {
  const McConfig c1 = default_mc_config(McKind::example1);
  CHECK(c1.n == 1000);
  CHECK(c1.reps == 100);
  const McConfig c2 = default_mc_config(McKind::example2);
  CHECK(c2.n == 500);
  const McConfig co = default_mc_config(McKind::ovb);
  CHECK(co.n == 500);
  CHECK(co.max_sweeps == 1);  // its constraint set factorizes: one sweep lands
  CHECK(co.eta2s.size() == 5);
}

TEST_CASE("replication reports are independent of the thread count") {
  McConfig cfg = default_mc_config(McKind::ovb);
  cfg.reps = 3;
  cfg.n = 300;
  cfg.eta2s = {0.05, 0.2};
  cfg.seed = 123;

  cfg.jobs = 1;
  const McReport a = run_mc(cfg);
  cfg.jobs = 4;
  const McReport b = run_mc(cfg);

  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].mean_est == b.rows[i].mean_est);
    CHECK(a.rows[i].mean_var == b.rows[i].mean_var);
    CHECK(a.rows[i].mc_var == b.rows[i].mc_var);
    CHECK(a.rows[i].reps_ok == b.rows[i].reps_ok);
  }
  CHECK(table_csv(a) == table_csv(b));
  CHECK(a.valid);
  CHECK(a.failures == 0);
}

TEST_CASE("tilt experiment emits both variants per grid point") {
  McConfig cfg = default_mc_config(McKind::example2);
  cfg.reps = 2;
  cfg.n = 260;
  cfg.gammas = {0.0, 2.0};
  cfg.seed = 5;
  const McReport rep = run_mc(cfg);
  CHECK(rep.valid);
  REQUIRE(rep.rows.size() == 4);  // 2 gammas x {nonparametric, projected}
  int projected = 0, plain = 0;
  for (const McRow& r : rep.rows) {
    CHECK(r.kind == "example2");
    CHECK(r.n == 260);
    CHECK(r.reps_ok == 2);
    if (r.variant == "projected")
      ++projected;
    else if (r.variant == "nonparametric")
      ++plain;
  }
  CHECK(projected == 2);
  CHECK(plain == 2);

  // disabling the projection halves the table
  cfg.with_projection = false;
  const McReport off = run_mc(cfg);
  CHECK(off.rows.size() == 2);
  for (const McRow& r : off.rows) CHECK(r.variant == "nonparametric");
}

TEST_CASE("bound experiment emits four variants per grid point") {
  McConfig cfg = default_mc_config(McKind::ovb);
  cfg.reps = 2;
  cfg.n = 300;
  cfg.eta2s = {0.1};
  cfg.seed = 9;
  const McReport rep = run_mc(cfg);
  REQUIRE(rep.rows.size() == 4);
  std::vector<std::string> variants;
  for (const McRow& r : rep.rows) variants.push_back(r.variant);
  CHECK(std::count(variants.begin(), variants.end(), "nonparametric:lo") == 1);
  CHECK(std::count(variants.begin(), variants.end(), "nonparametric:hi") == 1);
  CHECK(std::count(variants.begin(), variants.end(), "projected:lo") == 1);
  CHECK(std::count(variants.begin(), variants.end(), "projected:hi") == 1);
  for (const McRow& r : rep.rows) CHECK(r.param == 0.1);
}

TEST_CASE("csv and markdown tables carry the stable layout") {
  McConfig cfg = default_mc_config(McKind::example1);
  cfg.reps = 1;
  cfg.n = 240;
  cfg.gammas = {0.0};
  cfg.seed = 2;
  const McReport rep = run_mc(cfg);
  const std::string csv = table_csv(rep);
  CHECK(csv.rfind("kind,n,param,variant,mean_estimate,mean_variance,reps", 0) == 0);
  CHECK(csv.find("example1,240,0,nonparametric,") != std::string::npos);
  CHECK(csv.find("wall") == std::string::npos);

  const std::string md = table_markdown(rep);
  CHECK(md.find("| kind ") != std::string::npos);
  CHECK(md.find("| example1 ") != std::string::npos);
  CHECK(md.find("wall") == std::string::npos);
}

TEST_CASE("value formatting is stable") {
  CHECK(fmt_sig(0.0305219, 4) == "0.03052");
  CHECK(fmt_sig(-1.25e-07, 4) == "-1.25e-07");
  CHECK(fmt_sig(0.0, 4) == "0");
  CHECK(fmt_fixed(0.00012345, 4) == "0.0001");
  CHECK(fmt_fixed(-0.5, 4) == "-0.5000");
}

TEST_CASE("starved replications are recorded as failures, not crashes") {
  McConfig cfg = default_mc_config(McKind::example1);
  cfg.reps = 2;
  cfg.n = 30;  // far too small for 5 stratified folds now and then
  cfg.k_folds = 14;
  cfg.gammas = {0.0};
  cfg.seed = 3;
  const McReport rep = run_mc(cfg);
  CHECK(rep.failures > 0);
  CHECK(!rep.failure_notes.empty());
  CHECK(!rep.valid);  // over the default 10% failure budget
}
