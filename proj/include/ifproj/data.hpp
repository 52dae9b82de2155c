#ifndef IFPROJ_DATA_HPP
#define IFPROJ_DATA_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ifproj {

// Rectangular causal dataset: dense covariates (column-major so per-feature
// scans are contiguous), binary treatment, numeric outcome.
struct Dataset {
  Eigen::MatrixXd x;               // n x p
  Eigen::VectorXi t;               // values in {0,1}
  Eigen::VectorXd y;
  std::vector<std::string> names;  // covariate names, size p

  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }
};

// validates invariants (finite covariates/outcome, t in {0,1}, unique names)
Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXi t, Eigen::VectorXd y,
                     std::vector<std::string> names);

// Column roles for load_csv. Empty covariates => every other column.
struct Schema {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> covariates;
};

Dataset load_csv(const std::string& path, const Schema& schema);

// full-precision emit so load(write(ds)) reproduces ds within 1e-12
void write_csv(const Dataset& ds, const std::string& path);

struct FoldAssignment {
  std::vector<int> fold;  // labels in 1..k
  int k = 0;
  std::uint64_t seed = 0;
};

// Stratified by treatment arm: seeded within-arm shuffles, then round-robin
// (controls continue the treated cycle so fold sizes differ by at most one).
// Throws InfeasibleSplitError unless both arms have >= k units.
FoldAssignment assign_folds(const Dataset& ds, int k, std::uint64_t seed);

struct ValidationIssue {
  enum class Severity { warning, error };
  Severity severity;
  std::string message;
};

// non-throwing checks used by the CLI before estimation: outcome range for
// binary tasks, degenerate arms, constant covariates, fold feasibility
std::vector<ValidationIssue> validate_dataset(const Dataset& ds, bool binary_outcome, int k);

// row subset in the given order
Dataset subset(const Dataset& ds, const std::vector<int>& rows);

// rows where pred(fold_label) is true, in original order
std::vector<int> rows_where(const std::vector<int>& fold, int k, bool in_fold);

}  // namespace ifproj

#endif
