#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chaoslab/error.hpp"

namespace chaoslab::stats {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Sample mean with standard error s / sqrt(n). SE is NaN for n < 2.
inline Estimate mean_se(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  if (x.size() < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

inline Estimate mean_se(const Eigen::VectorXd& x) { return mean_se(std::span<const double>(x.data(), x.size())); }

inline double central_moment(std::span<const double> x, double mean, int k) {
  double acc = 0.0;
  for (double v : x) acc += std::pow(v - mean, k);
  return acc / static_cast<double>(x.size());
}

inline double skewness(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  const double m2 = central_moment(x, mean, 2);
  return central_moment(x, mean, 3) / std::pow(m2, 1.5);
}

inline double excess_kurtosis(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  const double m2 = central_moment(x, mean, 2);
  return central_moment(x, mean, 4) / (m2 * m2) - 3.0;
}

/// Grouped (delete-a-group) jackknife of a statistic over contiguous blocks.
inline Estimate jackknife(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                          std::size_t groups = 50) {
  if (x.size() < 2 * groups) throw capacity_error("jackknife: too few samples for the group count");
  const double full = stat(x);
  const std::size_t block = x.size() / groups;
  const std::size_t used = block * groups;
  std::vector<double> leave(used - block);
  std::vector<double> reps(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < used; ++i)
      if (i / block != g) leave[w++] = x[i];
    reps[g] = stat(leave);
  }
  double mean = 0.0;
  for (double r : reps) mean += r;
  mean /= static_cast<double>(groups);
  double ss = 0.0;
  for (double r : reps) ss += (r - mean) * (r - mean);
  const double gn = static_cast<double>(groups);
  return {full, std::sqrt((gn - 1.0) / gn * ss)};
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw precondition_error("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    worst = std::max(worst, std::abs(i / na - j / nb));
  }
  return worst;
}

/// Equal-width histogram counts over [lo, hi); samples outside are dropped.
inline std::vector<double> histogram(std::span<const double> x, double lo, double hi, int bins) {
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double width = (hi - lo) / bins;
  for (double v : x) {
    if (v < lo || v >= hi) continue;
    const auto b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  return counts;
}

/// Empirical mean and covariance of the columns of X (rows are variables),
/// each with an entrywise standard error.
struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_se;
};

inline MomentSummary moments(const Eigen::MatrixXd& x) {
  const double n = static_cast<double>(x.cols());
  MomentSummary s;
  s.mean = x.rowwise().mean();
  const Eigen::MatrixXd c = x.colwise() - s.mean;
  s.cov = c * c.transpose() / n;
  s.mean_se = (s.cov.diagonal() / n).cwiseSqrt();
  // Var of the product (x_a - m_a)(x_b - m_b) per entry.
  const Eigen::MatrixXd sq = c.array().square().matrix();
  const Eigen::MatrixXd fourth = sq * sq.transpose() / n;
  s.cov_se = ((fourth - s.cov.cwiseProduct(s.cov)).cwiseMax(0.0) / n).cwiseSqrt();
  return s;
}

/// |a - b| <= k * sqrt(se_a^2 + se_b^2)
inline bool agree(const Estimate& a, const Estimate& b, double k = 3.0) {
  return std::abs(a.value - b.value) <= k * std::sqrt(a.se * a.se + b.se * b.se);
}

}  // namespace chaoslab::stats
