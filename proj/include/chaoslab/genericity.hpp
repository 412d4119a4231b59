#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaoslab/error.hpp"
#include "chaoslab/models.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/stats.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

/// Default genericity tolerance d^{-1/4} on the largest self-contraction.
inline double default_genericity_tol(int d) { return std::pow(static_cast<double>(d), -0.25); }

/// ||iota(beta) (x)_r iota(beta)||_F for r = 1..k-1.
inline std::vector<double> contraction_norms(const ChaosCoordinate& beta) {
  const int k = beta.order();
  if (k < 2 || k > 3) throw order_error("contraction_norms: supported orders are 2 and 3");
  if (beta.is_rank_one()) return std::vector<double>(static_cast<std::size_t>(k - 1), 1.0);
  const Tensor t = beta.tensor();
  if (k == 2) {
    const Eigen::MatrixXd b = t.matrix();
    return {(b * b).norm()};
  }
  // Order 3 through the d^2 x d unfolding A: by symmetry T (x)_1 T = A A^T
  // and T (x)_2 T = A^T A, which share a Frobenius norm.
  const int d = t.dim();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(t.data().data(), d * d, d);
  const double r = (a.transpose() * a).norm();
  return {r, r};
}

namespace detail {

// Group power sums of xi for a fast grouped jackknife of the excess kurtosis.
struct PowerSums {
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, n = 0;
  void add(double v) {
    const double v2 = v * v;
    s1 += v;
    s2 += v2;
    s3 += v2 * v;
    s4 += v2 * v2;
    n += 1.0;
  }
  PowerSums& operator+=(const PowerSums& o) {
    s1 += o.s1, s2 += o.s2, s3 += o.s3, s4 += o.s4, n += o.n;
    return *this;
  }
  PowerSums operator-(const PowerSums& o) const { return {s1 - o.s1, s2 - o.s2, s3 - o.s3, s4 - o.s4, n - o.n}; }
  double excess_kurtosis() const {
    const double m = s1 / n;
    const double m2 = s2 / n - m * m;
    const double m4 = s4 / n - 4.0 * m * s3 / n + 6.0 * m * m * s2 / n - 3.0 * m * m * m * m;
    return m4 / (m2 * m2) - 3.0;
  }
};

}  // namespace detail

/// Monte Carlo excess kurtosis of values produced by `eval` on Gaussian
/// blocks X (d x b); `eval(X, out)` fills out with one value per column.
template <class Eval>
stats::Estimate excess_kurtosis_mc_with(int d, std::int64_t n_mc, std::uint64_t seed, Eval&& eval, int groups = 50) {
  if (n_mc < 1000) throw capacity_error("excess_kurtosis_mc: need at least 1000 samples");
  Rng rng(seed);
  std::vector<detail::PowerSums> grp(static_cast<std::size_t>(groups));
  constexpr std::int64_t block = 4096;
  Eigen::MatrixXd x;
  Eigen::VectorXd v;
  for (std::int64_t done = 0; done < n_mc; done += block) {
    const auto b = std::min(block, n_mc - done);
    x.resize(d, b);
    rng.fill_normal(x);
    v.resize(b);
    eval(x, v);
    for (std::int64_t i = 0; i < b; ++i) grp[static_cast<std::size_t>((done + i) * groups / n_mc)].add(v[i]);
  }
  detail::PowerSums total;
  for (const auto& g : grp) total += g;
  const double full = total.excess_kurtosis();
  double mean = 0.0;
  std::vector<double> reps(grp.size());
  for (std::size_t g = 0; g < grp.size(); ++g) mean += reps[g] = (total - grp[g]).excess_kurtosis();
  mean /= groups;
  double ss = 0.0;
  for (double r : reps) ss += (r - mean) * (r - mean);
  return {full, std::sqrt((groups - 1.0) / groups * ss)};
}

/// Monte Carlo estimate of E[xi^4] - 3 for xi = <beta, h_k(x)>, with a
/// grouped-jackknife standard error.
inline stats::Estimate excess_kurtosis_mc(const ChaosCoordinate& beta, std::int64_t n_mc, std::uint64_t seed) {
  const int k = beta.order();
  if (k > 3 && !beta.is_rank_one()) throw order_error("excess_kurtosis_mc: order above 3");
  if (beta.is_rank_one()) {
    const Eigen::VectorXd u = beta.direction();
    return excess_kurtosis_mc_with(beta.dim(), n_mc, seed, [&](const Eigen::MatrixXd& x, Eigen::VectorXd& out) {
      out = (u.transpose() * x).transpose();
      for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = he(k, out[i]);
    });
  }
  if (k == 2) {
    const Eigen::MatrixXd b = beta.tensor().matrix();
    const double tr = b.trace();
    return excess_kurtosis_mc_with(beta.dim(), n_mc, seed, [&](const Eigen::MatrixXd& x, Eigen::VectorXd& out) {
      const Eigen::MatrixXd bx = b * x;
      out = ((x.cwiseProduct(bx).colwise().sum().array() - tr) / std::sqrt(2.0)).matrix().transpose();
    });
  }
  const BasisIndexer idx(beta.dim(), k);
  const Eigen::VectorXd coef = beta.coefficients();
  return excess_kurtosis_mc_with(beta.dim(), n_mc, seed, [&](const Eigen::MatrixXd& x, Eigen::VectorXd& out) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) out[i] = coef.dot(hermite_features(x.col(i), idx));
  });
}

struct GenericityReport {
  int order = 0;
  std::vector<double> contraction_norms;
  double kurtosis = 0.0;
  double se = 0.0;
  double tolerance = 0.0;
  bool generic_at_default_tol = false;
};

inline void to_json(nlohmann::json& j, const GenericityReport& r) {
  j = nlohmann::json{{"order", r.order},
                     {"contraction_norms", r.contraction_norms},
                     {"kurtosis", r.kurtosis},
                     {"se", r.se},
                     {"tolerance", r.tolerance},
                     {"generic_at_default_tol", r.generic_at_default_tol}};
}

inline bool generic_at(const std::vector<double>& norms, double tol) {
  return !norms.empty() && *std::max_element(norms.begin(), norms.end()) <= tol;
}

/// Contraction norms plus (if n_mc > 0) the Monte Carlo kurtosis.
inline GenericityReport genericity_report(const ChaosCoordinate& beta, std::int64_t n_mc, std::uint64_t seed) {
  GenericityReport r;
  r.order = beta.order();
  r.contraction_norms = contraction_norms(beta);
  r.tolerance = default_genericity_tol(beta.dim());
  r.generic_at_default_tol = generic_at(r.contraction_norms, r.tolerance);
  if (n_mc > 0) {
    const auto k = excess_kurtosis_mc(beta, n_mc, seed);
    r.kurtosis = k.value;
    r.se = k.se;
  }
  return r;
}

/// Order-2 check of the fourth-moment bound against the exact identity
/// kurtosis = 12 ||B^2||_F^2 = 12 sum lambda^4.
struct KurtosisConsistency {
  double contraction_sq = 0.0;   // max_r ||T (x)_r T||_F^2
  double exact_kurtosis = 0.0;   // 12 ||B^2||_F^2
  double eigen_kurtosis = 0.0;   // 12 sum lambda_i^4
  stats::Estimate mc;
  bool pass = false;
};

inline void to_json(nlohmann::json& j, const KurtosisConsistency& r) {
  j = nlohmann::json{{"contraction_sq", r.contraction_sq}, {"exact_kurtosis", r.exact_kurtosis},
                     {"eigen_kurtosis", r.eigen_kurtosis}, {"kurtosis", r.mc.value},
                     {"se", r.mc.se},                      {"pass", r.pass}};
}

inline KurtosisConsistency kurtosis_contraction_consistency(const ChaosCoordinate& beta, std::int64_t n_mc,
                                                            std::uint64_t seed) {
  if (beta.order() != 2) throw order_error("kurtosis_contraction_consistency: order 2 only");
  KurtosisConsistency r;
  r.contraction_sq = std::pow(contraction_norms(beta)[0], 2);
  r.exact_kurtosis = 12.0 * r.contraction_sq;
  const Eigen::MatrixXd b = beta.tensor().matrix();
  const Eigen::VectorXd lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b, Eigen::EigenvaluesOnly).eigenvalues();
  r.eigen_kurtosis = 12.0 * lam.array().pow(4).sum();
  r.mc = excess_kurtosis_mc(beta, n_mc, seed);
  r.pass = std::abs(r.mc.value - r.exact_kurtosis) <= 4.0 * r.mc.se;
  return r;
}

/// beta uniform on the unit sphere of R^{B_{d,k}}, reported with its
/// contraction norms.
struct GenericBeta {
  ChaosCoordinate beta;
  std::vector<double> contraction_norms;
};

inline GenericBeta sample_generic_beta(int d, int k, std::uint64_t seed) {
  auto beta = ChaosCoordinate::uniform_sphere(k, d, seed);
  auto norms = contraction_norms(beta);
  return {std::move(beta), std::move(norms)};
}

}  // namespace chaoslab
