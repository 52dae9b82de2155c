#include "ifproj/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ifproj/errors.hpp"
#include "ifproj/rng.hpp"

namespace ifproj {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& s, int row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("csv row " + std::to_string(row) + ", column '" + col +
                     "': cannot parse '" + s + "' as a number");
  }
}

}  // namespace

Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXi t, Eigen::VectorXd y,
                     std::vector<std::string> names) {
  const auto n = x.rows();
  if (t.size() != n || y.size() != n)
    throw DomainError("dataset: treatment/outcome length does not match covariate rows");
  if (static_cast<Eigen::Index>(names.size()) != x.cols())
    throw DomainError("dataset: name count does not match covariate columns");
  if (n == 0) throw DomainError("dataset: no rows");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t(i) != 0 && t(i) != 1)
      throw DomainError("dataset: treatment must be 0/1, found " + std::to_string(t(i)) +
                        " at row " + std::to_string(i + 1));
    if (!std::isfinite(y(i)))
      throw DomainError("dataset: non-finite outcome at row " + std::to_string(i + 1));
  }
  if (!x.allFinite()) throw DomainError("dataset: non-finite covariate value");
  std::set<std::string> seen;
  for (const auto& nm : names) {
    if (nm.empty()) throw SchemaError("dataset: empty covariate name");
    if (!seen.insert(nm).second) throw SchemaError("dataset: duplicate covariate name '" + nm + "'");
  }
  Dataset ds;
  ds.x = std::move(x);
  ds.t = std::move(t);
  ds.y = std::move(y);
  ds.names = std::move(names);
  return ds;
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open csv file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv file '" + path + "' is empty");
  const auto header = split_csv_line(line);

  auto col_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError("csv '" + path + "': column '" + name + "' not in header");
    return static_cast<int>(it - header.begin());
  };

  const int t_col = col_of(schema.treatment);
  const int y_col = col_of(schema.outcome);
  if (t_col == y_col) throw SchemaError("treatment and outcome refer to the same column");

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (const auto& h : header)
      if (h != schema.treatment && h != schema.outcome) cov_names.push_back(h);
  }
  if (cov_names.empty()) throw SchemaError("csv '" + path + "': no covariate columns");
  std::vector<int> cov_cols;
  for (const auto& nm : cov_names) {
    if (nm == schema.treatment || nm == schema.outcome)
      throw SchemaError("covariate '" + nm + "' duplicates the treatment/outcome role");
    cov_cols.push_back(col_of(nm));
  }

  std::vector<std::vector<double>> xrows;
  std::vector<int> ts;
  std::vector<double> ys;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("csv row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    const double tv = parse_number(cells[t_col], row, schema.treatment);
    if (tv != 0.0 && tv != 1.0)
      throw DomainError("csv row " + std::to_string(row) + ": treatment value " +
                        cells[t_col] + " is not 0/1");
    ts.push_back(static_cast<int>(tv));
    ys.push_back(parse_number(cells[y_col], row, schema.outcome));
    std::vector<double> xr(cov_cols.size());
    for (std::size_t j = 0; j < cov_cols.size(); ++j)
      xr[j] = parse_number(cells[cov_cols[j]], row, cov_names[j]);
    xrows.push_back(std::move(xr));
  }
  if (xrows.empty()) throw ParseError("csv '" + path + "' has a header but no data rows");

  const int n = static_cast<int>(xrows.size());
  const int p = static_cast<int>(cov_cols.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXi t(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    t(i) = ts[i];
    y(i) = ys[i];
    for (int j = 0; j < p; ++j) x(i, j) = xrows[i][j];
  }
  return make_dataset(std::move(x), std::move(t), std::move(y), std::move(cov_names));
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "t,y";
  for (const auto& nm : ds.names) out << ',' << nm;
  out << '\n';
  char buf[40];
  for (int i = 0; i < ds.n(); ++i) {
    out << ds.t(i);
    std::snprintf(buf, sizeof buf, "%.17g", ds.y(i));
    out << ',' << buf;
    for (int j = 0; j < ds.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

FoldAssignment assign_folds(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2 || k > ds.n()) throw DomainError("fold count must satisfy 2 <= k <= n");
  std::vector<int> treated, control;
  for (int i = 0; i < ds.n(); ++i) (ds.t(i) == 1 ? treated : control).push_back(i);
  if (static_cast<int>(treated.size()) < k || static_cast<int>(control.size()) < k)
    throw InfeasibleSplitError("stratified split infeasible: need at least k=" +
                               std::to_string(k) + " units per arm, have " +
                               std::to_string(treated.size()) + " treated / " +
                               std::to_string(control.size()) + " control");
  SeedTree tree(seed);
  auto rng_t = tree.child(1).rng();
  auto rng_c = tree.child(2).rng();
  rng_t.shuffle(treated);
  rng_c.shuffle(control);

  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold.assign(ds.n(), 0);
  std::size_t cursor = 0;
  for (int idx : treated) fa.fold[idx] = 1 + static_cast<int>(cursor++ % k);
  for (int idx : control) fa.fold[idx] = 1 + static_cast<int>(cursor++ % k);
  return fa;
}

std::vector<ValidationIssue> validate_dataset(const Dataset& ds, bool binary_outcome, int k) {
  std::vector<ValidationIssue> issues;
  auto err = [&](const std::string& m) {
    issues.push_back({ValidationIssue::Severity::error, m});
  };
  auto warn = [&](const std::string& m) {
    issues.push_back({ValidationIssue::Severity::warning, m});
  };

  const int nt = ds.t.sum();
  if (nt == 0 || nt == ds.n()) err("treatment arm is empty");
  if (binary_outcome) {
    for (int i = 0; i < ds.n(); ++i)
      if (ds.y(i) != 0.0 && ds.y(i) != 1.0) {
        err("binary-outcome task but outcome at row " + std::to_string(i + 1) + " is " +
            std::to_string(ds.y(i)));
        break;
      }
  }
  for (int j = 0; j < ds.p(); ++j) {
    const double lo = ds.x.col(j).minCoeff(), hi = ds.x.col(j).maxCoeff();
    if (lo == hi) warn("covariate '" + ds.names[j] + "' is constant");
  }
  if (k >= 2 && (nt < k || ds.n() - nt < k))
    err("stratified " + std::to_string(k) + "-fold split infeasible (arm sizes " +
        std::to_string(nt) + "/" + std::to_string(ds.n() - nt) + ")");
  if (ds.n() < 10 * std::max(k, 1)) warn("very small sample for cross-fitting");
  return issues;
}

Dataset subset(const Dataset& ds, const std::vector<int>& rows) {
  Eigen::MatrixXd x(rows.size(), ds.p());
  Eigen::VectorXi t(rows.size());
  Eigen::VectorXd y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= ds.n()) throw DomainError("subset: row index out of range");
    x.row(i) = ds.x.row(r);
    t(i) = ds.t(r);
    y(i) = ds.y(r);
  }
  Dataset out;
  out.x = std::move(x);
  out.t = std::move(t);
  out.y = std::move(y);
  out.names = ds.names;
  return out;
}

std::vector<int> rows_where(const std::vector<int>& fold, int k, bool in_fold) {
  std::vector<int> rows;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if ((fold[i] == k) == in_fold) rows.push_back(static_cast<int>(i));
  return rows;
}

}  // namespace ifproj
