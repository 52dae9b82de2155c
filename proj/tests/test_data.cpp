#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <set>

#include "ifproj/data.hpp"
#include "ifproj/errors.hpp"

using namespace ifproj;

namespace {

Dataset small_dataset(int n = 20) {
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXi t(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 0.1 * i - 1.0;
    x(i, 1) = (i % 3) - 1.0;
    t(i) = i % 2;
    y(i) = (i % 5) / 4.0;
  }
  return make_dataset(x, t, y, {"a", "b"});
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("make_dataset validates invariants") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 2);
  Eigen::VectorXi t(4);
  t << 0, 1, 0, 1;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);

  CHECK_NOTHROW(make_dataset(x, t, y, {"a", "b"}));

  Eigen::MatrixXd bad_x = x;
  bad_x(1, 1) = std::nan("");
  CHECK_THROWS_AS(make_dataset(bad_x, t, y, {"a", "b"}), DomainError);

  Eigen::VectorXi bad_t = t;
  bad_t(2) = 2;
  CHECK_THROWS_AS(make_dataset(x, bad_t, y, {"a", "b"}), DomainError);

  CHECK_THROWS_AS(make_dataset(x, t, y, {"a", "a"}), SchemaError);
  CHECK_THROWS_AS(make_dataset(x, t, y, {"a"}), DomainError);
}

TEST_CASE("csv round trip preserves values") {
  const Dataset ds = small_dataset();
  TempFile f("ifproj_test_roundtrip.csv");
  write_csv(ds, f.path);
  Schema schema;
  schema.treatment = "t";
  schema.outcome = "y";
  const Dataset back = load_csv(f.path, schema);
  REQUIRE(back.n() == ds.n());
  REQUIRE(back.p() == ds.p());
  CHECK(back.names == ds.names);
  CHECK((back.x - ds.x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.y - ds.y).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(back.t == ds.t);
}

TEST_CASE("schema selects and orders covariates") {
  const Dataset ds = small_dataset();
  TempFile f("ifproj_test_schema.csv");
  write_csv(ds, f.path);
  Schema schema;
  schema.treatment = "t";
  schema.outcome = "y";
  schema.covariates = {"b"};
  const Dataset one = load_csv(f.path, schema);
  CHECK(one.p() == 1);
  CHECK(one.names == std::vector<std::string>{"b"});
  CHECK((one.x.col(0) - ds.x.col(1)).cwiseAbs().maxCoeff() == 0.0);

  schema.covariates = {"missing"};
  CHECK_THROWS_AS(load_csv(f.path, schema), SchemaError);
}

TEST_CASE("fold assignment is stratified and balanced") {
  const Dataset ds = small_dataset(40);
  const FoldAssignment fa = assign_folds(ds, 4, 9);
  REQUIRE(static_cast<int>(fa.fold.size()) == ds.n());
  CHECK(fa.k == 4);

  // per-arm fold counts differ by at most one
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<int> counts(4, 0);
    for (int i = 0; i < ds.n(); ++i)
      if (ds.t(i) == arm) counts[fa.fold[i] - 1]++;
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
  }

  const FoldAssignment again = assign_folds(ds, 4, 9);
  CHECK(fa.fold == again.fold);
  const FoldAssignment other = assign_folds(ds, 4, 10);
  CHECK(fa.fold != other.fold);
}

TEST_CASE("fold assignment refuses starved arms") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(6, 1);
  Eigen::VectorXi t(6);
  t << 1, 0, 0, 0, 0, 0;  // one treated unit
  Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
  const Dataset ds = make_dataset(x, t, y, {"a"});
  CHECK_THROWS_AS(assign_folds(ds, 2, 1), InfeasibleSplitError);
}

TEST_CASE("subset and rows_where agree with fold labels") {
  const Dataset ds = small_dataset(12);
  const FoldAssignment fa = assign_folds(ds, 3, 2);
  const std::vector<int> in = rows_where(fa.fold, 2, true);
  const std::vector<int> out = rows_where(fa.fold, 2, false);
  CHECK(in.size() + out.size() == static_cast<std::size_t>(ds.n()));
  for (int r : in) CHECK(fa.fold[r] == 2);
  for (int r : out) CHECK(fa.fold[r] != 2);
  const Dataset sub = subset(ds, in);
  REQUIRE(sub.n() == static_cast<int>(in.size()));
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(sub.y(i) == ds.y(in[i]));
    CHECK(sub.t(i) == ds.t(in[i]));
  }
}

TEST_CASE("dataset validation flags problems without throwing") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, 2);  // first column constant
  for (int i = 0; i < 8; ++i) x(i, 1) = i;
  Eigen::VectorXi t(8);
  t << 0, 1, 0, 1, 0, 1, 0, 1;
  Eigen::VectorXd y(8);
  y << 0, 1, 0, 1, 0, 1, 0, 0.5;  // not binary
  const Dataset ds = make_dataset(x, t, y, {"a", "b"});

  const auto issues = validate_dataset(ds, /*binary_outcome=*/true, 2);
  bool saw_binary_error = false, saw_constant_warning = false;
  for (const auto& issue : issues) {
    if (issue.severity == ValidationIssue::Severity::error &&
        issue.message.find("outcome") != std::string::npos)
      saw_binary_error = true;
    if (issue.severity == ValidationIssue::Severity::warning &&
        issue.message.find("constant") != std::string::npos)
      saw_constant_warning = true;
  }
  CHECK(saw_binary_error);
  CHECK(saw_constant_warning);

  CHECK(validate_dataset(ds, /*binary_outcome=*/false, 2).size() ==
        issues.size() - 1);
}
