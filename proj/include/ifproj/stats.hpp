#ifndef IFPROJ_STATS_HPP
#define IFPROJ_STATS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "ifproj/errors.hpp"

namespace ifproj {

inline double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw DomainError("mean of empty vector");
  return v.mean();
}

// unbiased sample variance (n-1 divisor); n >= 2
inline double sample_var(const Eigen::VectorXd& v) {
  const auto n = v.size();
  if (n < 2) throw DomainError("sample variance needs at least 2 values");
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

// population variance (n divisor), used where the estimand is E[(.)^2]-style
inline double pop_var(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw DomainError("variance of empty vector");
  const double m = v.mean();
  return (v.array() - m).square().mean();
}

// median: odd -> middle order statistic, even -> average of the two middles
inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("pearson: bad sizes");
  const double ma = a.mean(), mb = b.mean();
  const Eigen::ArrayXd da = a.array() - ma, db = b.array() - mb;
  const double denom = std::sqrt(da.square().sum() * db.square().sum());
  if (denom == 0.0) return 0.0;
  return (da * db).sum() / denom;
}

}  // namespace ifproj

#endif
