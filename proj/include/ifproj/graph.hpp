#ifndef IFPROJ_GRAPH_HPP
#define IFPROJ_GRAPH_HPP

#include <string>
#include <vector>

namespace ifproj {

// Directed acyclic graph over named vertices. Construction validates
// acyclicity and reports a cycle when there is one.
struct Dag {
  std::vector<std::string> names;
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<int>> children;

  int size() const { return static_cast<int>(names.size()); }
  int index_of(const std::string& name) const;  // SchemaError if unknown
};

Dag make_dag(std::vector<std::string> names, const std::vector<std::pair<int, int>>& edges);

// Edge-list text: statements separated by ';' or newlines, '#' comments.
//   vertex A;      declares an isolated vertex (optional for edge endpoints)
//   A -> B;        declares an edge (and both vertices)
Dag parse_dag(const std::string& text);
Dag load_dag(const std::string& path);

// True iff a and b are d-separated given S. a != b, neither in S.
// Linear-time reachability over (vertex, entry-direction) states.
bool d_separated(const Dag& g, int a, int b, const std::vector<int>& given);

// One conditional-independence statement X_i _||_ X_j | X_S over covariate
// indices (positions in some covariate name list, not DAG vertex ids).
struct CiConstraint {
  int i = -1;
  int j = -1;
  std::vector<int> cond;

  bool operator==(const CiConstraint&) const = default;
};

// canonical form: i < j, cond sorted ascending; validates index ranges
CiConstraint canonical_constraint(int i, int j, std::vector<int> cond, int p);

// All pairwise constraints among `covariates` (DAG vertex names) implied by
// the DAG with conditioning sets drawn from the remaining covariates,
// |S| <= max_cond. Deduplicated, sorted lexicographically by (i, j, cond).
// Indices refer to positions in `covariates`.
std::vector<CiConstraint> implied_constraints(const Dag& g,
                                              const std::vector<std::string>& covariates,
                                              int max_cond);

// Text format, one statement per line:  a _||_ b | c, d    ('#' comments)
std::vector<CiConstraint> parse_constraints(const std::string& text,
                                            const std::vector<std::string>& names);
std::vector<CiConstraint> load_constraints(const std::string& path,
                                           const std::vector<std::string>& names);
std::string format_constraint(const CiConstraint& c, const std::vector<std::string>& names);
std::string format_constraints(const std::vector<CiConstraint>& cs,
                               const std::vector<std::string>& names);

}  // namespace ifproj

#endif
