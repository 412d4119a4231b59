#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaoslab/erm.hpp"
#include "chaoslab/error.hpp"
#include "chaoslab/genericity.hpp"
#include "chaoslab/hermite.hpp"
#include "chaoslab/models.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/spectra.hpp"
#include "chaoslab/stats.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab::harness {

/// Deliberate corruptions used to confirm that the suite can fail.
enum class Fault { none, basis_order };

inline Fault parse_fault(const std::string& s) {
  if (s == "none") return Fault::none;
  if (s == "basis_order") return Fault::basis_order;
  throw config_error("unknown selftest fault '" + s + "'");
}

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;  // the measured residual or statistic
  double tol = 0.0;    // the bound it was held to
  std::string detail;
};

inline nlohmann::json to_json_checks(const std::vector<Check>& checks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : checks)
    j.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tol", c.tol}, {"detail", c.detail}});
  return j;
}

namespace selftest {

inline Check bound(std::string name, double value, double tol, std::string detail = "") {
  return {std::move(name), value <= tol, value, tol, std::move(detail)};
}

// Largest |mean - delta_jk| / SE over j, k <= 6.
inline Check hermite_orthonormality(std::uint64_t seed) {
  constexpr int n = 200000, kmax = 6, w = kmax + 1;
  Rng rng(seed);
  std::vector<double> sum(w * w, 0.0), sumsq(w * w, 0.0), h(w);
  for (int s = 0; s < n; ++s) {
    he_upto(rng.normal(), h);
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < w; ++k) {
        const double v = h[j] * h[k];
        sum[j * w + k] += v;
        sumsq[j * w + k] += v * v;
      }
  }
  double worst = 0.0;
  for (int j = 0; j < w; ++j)
    for (int k = 0; k < w; ++k) {
      const double mean = sum[j * w + k] / n;
      const double se = std::sqrt(std::max(sumsq[j * w + k] / n - mean * mean, 0.0) / n);
      worst = std::max(worst, std::abs(mean - (j == k ? 1.0 : 0.0)) / (se + 1e-300));
    }
  return bound("hermite_orthonormality_se", worst, 6.0);
}

// sqrt(k!) He_k(x + y) = sum_i C(k,i) sqrt(i!) He_i(x) y^{k-i}
inline Check hermite_translation() {
  double worst = 0.0;
  for (int k = 0; k <= 6; ++k)
    for (double x = -2.0; x <= 2.0; x += 0.5)
      for (double y = -1.5; y <= 1.5; y += 0.75) {
        double rhs = 0.0;
        for (int i = 0; i <= k; ++i) rhs += binomial(k, i) * std::sqrt(factorial(i)) * he(i, x) * std::pow(y, k - i);
        worst = std::max(worst, std::abs(std::sqrt(factorial(k)) * he(k, x + y) - rhs));
      }
  return bound("hermite_translation", worst, 1e-9);
}

inline Check quadrature_square() {
  const auto c = hermite_coeffs(ActivationSpec::square());
  const double expect[3] = {1.0, 0.0, std::sqrt(2.0)};
  double worst = 0.0;
  for (int k = 0; k <= 2; ++k) worst = std::max(worst, std::abs(c[k] - expect[k]));
  return bound("quadrature_square", worst, 1e-12);
}

inline Check parseval(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> mono(7);
    for (auto& c : mono) c = 2.0 * rng.uniform() - 1.0;
    const auto sigma = ActivationSpec::polynomial(mono);
    const auto rule = gauss_hermite(8);
    double second = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) second += rule.weights[i] * std::pow(sigma(rule.nodes[i]), 2);
    worst = std::max(worst, std::abs(hermite_coeffs(sigma).mu.squaredNorm() - second) / (1.0 + second));
  }
  return bound("parseval", worst, 1e-9);
}

// The embedding and the feature map must share one basis ordering:
// <iota(v), iota(u)> = <v, u> and <iota(v), H_k(x)> = <v, h_k(x)>.
inline Check iota_isometry(std::uint64_t seed, Fault fault) {
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 1; k <= 3; ++k) {
    const int d = 5;
    const auto b = static_cast<Eigen::Index>(basis_dim(d, k));
    const Eigen::VectorXd v = rng.normal_vector(b), u = rng.normal_vector(b);
    Eigen::VectorXd u_embedded = u;
    if (fault == Fault::basis_order) u_embedded.reverseInPlace();
    worst = std::max(worst, std::abs(inner(iota(v, k, d), iota(u_embedded, k, d)) - v.dot(u)) / (1.0 + v.norm() * u.norm()));
    const Eigen::VectorXd x = rng.normal_vector(d);
    Eigen::VectorXd h = hermite_features(x, k);
    if (fault == Fault::basis_order) h.reverseInPlace();
    worst = std::max(worst, std::abs(monic_chaos_eval(iota(v, k, d), x) - v.dot(h)) / (1.0 + std::abs(v.dot(h))));
  }
  return bound("iota_isometry", worst, 1e-12);
}

inline Check contraction_brute_force(std::uint64_t seed, int max_d = 4) {
  Rng rng(seed);
  double worst = 0.0;
  for (int d = 2; d <= max_d; ++d)
    for (int k = 1; k <= 3; ++k)
      for (int r = 0; r <= k; ++r) {
        const Tensor s = iota(rng.normal_vector(static_cast<Eigen::Index>(basis_dim(d, k))), k, d);
        const Tensor c = contract(s, s, r);
        // brute force over all index tuples
        for (std::size_t f = 0; f < c.size(); ++f) {
          const auto free = c.coords(f);
          const int left = k - r;
          double acc = 0.0;
          std::size_t shared = 1;
          for (int i = 0; i < r; ++i) shared *= static_cast<std::size_t>(d);
          for (std::size_t m = 0; m < shared; ++m) {
            std::vector<int> a(free.begin(), free.begin() + left), bb;
            std::vector<int> sh(static_cast<std::size_t>(r));
            std::size_t rem = m;
            for (int i = r - 1; i >= 0; --i) {
              sh[static_cast<std::size_t>(i)] = static_cast<int>(rem % static_cast<std::size_t>(d));
              rem /= static_cast<std::size_t>(d);
            }
            a.insert(a.end(), sh.begin(), sh.end());
            bb = sh;
            bb.insert(bb.end(), free.begin() + left, free.end());
            acc += s[s.offset(a)] * s[s.offset(bb)];
          }
          worst = std::max(worst, std::abs(acc - c[f]));
        }
      }
  return bound("contraction_brute_force", worst, 1e-12);
}

inline Check gram_hadamard(std::uint64_t seed) {
  const auto we = sample_weights(10, 20, seed);
  double worst = 0.0;
  for (int k = 1; k <= 4; ++k) worst = std::max(worst, gram_hadamard_check(we, k));
  return bound("gram_hadamard", worst, 1e-10);
}

// RF, GE, PGE and CGE feature means and covariances agree entrywise for a
// degree-2 activation; reports the worst |difference| / combined SE.
inline Check moment_matching(std::uint64_t seed) {
  const int d = 6, p = 8;
  const Eigen::Index n = 50000;
  const auto we = sample_weights(d, p, derive_seed(seed, "weights"));
  const auto sigma = ActivationSpec::from_hermite({0.4, 0.9, 0.7});
  const auto mu = hermite_coeffs(ActivationSpec{sigma.kind, sigma.coefficients, 2});
  TargetSpec t;
  t.s = 1;
  t.link = LinkSpec::identity_sum();
  std::vector<stats::MomentSummary> ms;
  for (auto tag : {ModelTag::RF, ModelTag::GE, ModelTag::PGE, ModelTag::CGE}) {
    ModelSampler s{tag, &we, &t, sigma, mu};
    ms.push_back(stats::moments(s(n, derive_seed(seed, to_string(tag))).Z));
  }
  double worst = 0.0;
  for (std::size_t a = 1; a < ms.size(); ++a) {
    const auto& x = ms[0];
    const auto& y = ms[a];
    for (Eigen::Index i = 0; i < p; ++i) {
      worst = std::max(worst, std::abs(x.mean[i] - y.mean[i]) /
                                  std::sqrt(x.mean_se[i] * x.mean_se[i] + y.mean_se[i] * y.mean_se[i]));
      for (Eigen::Index j = 0; j < p; ++j)
        worst = std::max(worst, std::abs(x.cov(i, j) - y.cov(i, j)) /
                                    std::sqrt(std::pow(x.cov_se(i, j), 2) + std::pow(y.cov_se(i, j), 2)));
    }
  }
  return bound("moment_matching_se", worst, 6.0);
}

inline Check rank_one_kurtosis(std::uint64_t seed) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
  u[0] = 1.0;
  const auto k = excess_kurtosis_mc(ChaosCoordinate::rank_one(2, u), 400000, seed);
  return bound("rank_one_kurtosis_se", std::abs(k.value - 12.0) / k.se, 6.0, "excess kurtosis " + std::to_string(k.value));
}

inline Check ridge_closed_form_check(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd z = rng.normal_matrix(30, 80);
    const Eigen::VectorXd y = rng.normal_vector(80);
    const Eigen::VectorXd ref = ridge_closed_form(z, y, 0.05);
    const auto fit = fit_ridge_erm(z, y, LossSpec::squared(), 0.05);
    worst = std::max(worst, (fit.theta - ref).norm() / ref.norm());
  }
  return bound("ridge_closed_form", worst, 1e-6);
}

inline Check prox_checks() {
  const auto logistic = LossSpec::logistic();
  double foc = 0.0;
  for (double z : {-3.0, 0.0, 0.7, 5.0})
    for (double g : {0.1, 1.0, 10.0})
      for (double y : {-1.0, 1.0}) {
        const double x = prox(y, z, g, logistic);
        foc = std::max(foc, std::abs(logistic.d1(y, x) + (x - z) / g));
      }
  const double p = prox(1.0, 0.0, 1.0, logistic);
  const bool ok = foc <= 1e-10 && std::abs(p - 0.401) <= 1e-3;
  return {"prox_first_order", ok, foc, 1e-10, "logistic prox at (1, 0, 1) = " + std::to_string(p)};
}

// Gaussian features in general position: separable iff p/n is large enough.
inline Check interpolation_threshold(std::uint64_t seed) {
  Rng rng(seed);
  const int n = 200;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const bool low = interpolation_check(rng.normal_matrix(50, n), y);
  const bool high = interpolation_check(rng.normal_matrix(200, n), y);
  return {"interpolation_threshold", !low && high, static_cast<double>(low) + 2.0 * high, 2.0,
          "value = [p/n = 0.25 separable] + 2 [p/n = 1 separable]"};
}

inline std::vector<Check> spectra_checks(std::uint64_t seed) {
  const auto we = sample_weights(12, 72, seed);
  const SpectraCaps caps;
  const auto s = v2_spike_decomposition(we, caps, seed);
  return {bound("v2_centered_op", s.centered_op, caps.v2_centered),
          bound("higher_gram_3", higher_gram_structure(we, 3, caps, seed), caps.order3),
          bound("higher_gram_4", higher_gram_structure(we, 4, caps, seed), caps.order4),
          bound("higher_gram_5", higher_gram_structure(we, 5, caps, seed), caps.order5)};
}

}  // namespace selftest

/// Every module's invariant suite at small sizes. Tolerances are wide enough
/// that verdicts do not depend on the seed.
inline std::vector<Check> run_selftest_checks(std::uint64_t seed, Fault fault = Fault::none) {
  using namespace selftest;
  std::vector<Check> out{hermite_orthonormality(derive_seed(seed, "orthonormality")),
                         hermite_translation(),
                         quadrature_square(),
                         parseval(derive_seed(seed, "parseval")),
                         iota_isometry(derive_seed(seed, "iota"), fault),
                         contraction_brute_force(derive_seed(seed, "contract")),
                         gram_hadamard(derive_seed(seed, "gram")),
                         moment_matching(derive_seed(seed, "moments")),
                         rank_one_kurtosis(derive_seed(seed, "kurtosis")),
                         ridge_closed_form_check(derive_seed(seed, "ridge")),
                         prox_checks(),
                         interpolation_threshold(derive_seed(seed, "interpolation"))};
  for (auto& c : spectra_checks(derive_seed(seed, "spectra"))) out.push_back(std::move(c));
  return out;
}

}  // namespace chaoslab::harness
