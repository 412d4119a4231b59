#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chaoslab/error.hpp"

namespace chaoslab {

// ---------------------------------------------------------------------------
// Univariate orthonormal Hermite polynomials
// ---------------------------------------------------------------------------

/// Orthonormal Hermite polynomial He_k(x), E[He_j(G) He_k(G)] = delta_jk.
/// Evaluated with sqrt(k+1) He_{k+1} = x He_k - sqrt(k) He_{k-1}.
inline double he(int k, double x) {
  if (k < 0) throw order_error("he: negative degree");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = (x * cur - std::sqrt(double(j)) * prev) / std::sqrt(double(j + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Writes He_0(x) .. He_{out.size()-1}(x) into out.
inline void he_upto(double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  for (std::size_t j = 1; j + 1 < out.size(); ++j)
    out[j + 1] = (x * out[j] - std::sqrt(double(j)) * out[j - 1]) / std::sqrt(double(j + 1));
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return std::round(b);
}

/// B_{d,k} = C(d+k-1, k), the number of degree-k multi-indices in d variables.
inline std::size_t basis_dim(int d, int k) {
  if (d < 0 || k < 0) throw precondition_error("basis_dim: negative argument");
  if (k == 0) return 1;
  if (d == 0) return 0;
  return static_cast<std::size_t>(binomial(d + k - 1, k));
}

// ---------------------------------------------------------------------------
// Multi-indices and the shared basis ordering
// ---------------------------------------------------------------------------

struct MultiIndex {
  std::vector<int> exponents;

  int order() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }
  int dim() const { return static_cast<int>(exponents.size()); }

  /// k! / (k_1! ... k_d!)
  double multinomial() const {
    double m = factorial(order());
    for (int e : exponents) m /= factorial(e);
    return m;
  }

  bool operator==(const MultiIndex&) const = default;
};

/// Enumerates the degree-k multi-indices of d variables in graded reverse
/// lexicographic order. A multi-index is stored as its sorted index tuple
/// i_1 <= ... <= i_k; entry positions follow the colexicographic order of
/// those tuples, so rank(i) = sum_j C(i_j + j - 1, j) (j = 1..k).
///
/// Indices supported on the first s coordinates form the prefix of length
/// B_{s,k}; restricting to a leading coordinate block is a truncation.
class BasisIndexer {
 public:
  BasisIndexer(int d, int k) : d_(d), k_(k) {
    if (d < 1) throw precondition_error("BasisIndexer: dimension must be >= 1");
    if (k < 0) throw order_error("BasisIndexer: negative order");
    const std::size_t n = basis_dim(d, k);
    tuples_.reserve(n * static_cast<std::size_t>(k));
    std::vector<int> t(static_cast<std::size_t>(k), 0);
    for (std::size_t r = 0; r < n; ++r) {
      tuples_.insert(tuples_.end(), t.begin(), t.end());
      // colex successor of a nondecreasing tuple
      for (int j = 0; j < k; ++j) {
        const int limit = (j + 1 < k) ? t[j + 1] : d - 1;
        if (t[j] < limit) {
          ++t[j];
          for (int i = 0; i < j; ++i) t[i] = 0;
          break;
        }
      }
    }
  }

  int dim() const { return d_; }
  int order() const { return k_; }
  std::size_t size() const { return k_ == 0 ? 1 : tuples_.size() / static_cast<std::size_t>(k_); }

  /// Sorted coordinate tuple of basis entry `pos`.
  std::span<const int> tuple(std::size_t pos) const {
    return {tuples_.data() + pos * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)};
  }

  MultiIndex multi_index(std::size_t pos) const {
    MultiIndex m{std::vector<int>(static_cast<std::size_t>(d_), 0)};
    for (int i : tuple(pos)) ++m.exponents[static_cast<std::size_t>(i)];
    return m;
  }

  /// Position of an arbitrary (unsorted) coordinate tuple's type.
  std::size_t rank(std::span<const int> coords) const {
    std::vector<int> t(coords.begin(), coords.end());
    if (static_cast<int>(t.size()) != k_) throw order_error("BasisIndexer::rank: tuple order mismatch");
    std::sort(t.begin(), t.end());
    std::size_t r = 0;
    for (int j = 0; j < k_; ++j) {
      if (t[j] < 0 || t[j] >= d_) throw precondition_error("BasisIndexer::rank: coordinate out of range");
      r += static_cast<std::size_t>(binomial(t[j] + j, j + 1));
    }
    return r;
  }

  std::size_t rank(const MultiIndex& m) const {
    if (m.dim() != d_) throw precondition_error("BasisIndexer::rank: dimension mismatch");
    if (m.order() != k_) throw order_error("BasisIndexer::rank: multi-index has wrong order");
    std::vector<int> t;
    for (int i = 0; i < d_; ++i)
      for (int c = 0; c < m.exponents[static_cast<std::size_t>(i)]; ++c) t.push_back(i);
    return rank(t);
  }

  /// k!/(k_1!...k_d!) for basis entry `pos`.
  double multinomial(std::size_t pos) const {
    auto t = tuple(pos);
    double m = factorial(k_);
    std::size_t i = 0;
    while (i < t.size()) {
      std::size_t j = i;
      while (j < t.size() && t[j] == t[i]) ++j;
      m /= factorial(static_cast<int>(j - i));
      i = j;
    }
    return m;
  }

 private:
  int d_;
  int k_;
  std::vector<int> tuples_;
};

/// q_k(w): coefficients of He_k(<w, x>) in the basis h_k(x).
inline Eigen::VectorXd q_k(const Eigen::VectorXd& w, int k) {
  if (k < 1) throw order_error("q_k: order must be >= 1");
  if (std::abs(w.norm() - 1.0) > 1e-10) throw precondition_error("q_k: w must be a unit vector");
  const BasisIndexer idx(static_cast<int>(w.size()), k);
  Eigen::VectorXd q(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    double prod = 1.0;
    for (int i : idx.tuple(r)) prod *= w[i];
    q[static_cast<Eigen::Index>(r)] = std::sqrt(idx.multinomial(r)) * prod;
  }
  return q;
}

/// h_k(x) = (He_k(x))_{|k| = k} in the shared basis ordering.
inline Eigen::VectorXd hermite_features(const Eigen::VectorXd& x, const BasisIndexer& idx) {
  const int k = idx.order();
  Eigen::MatrixXd table(k + 1, x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j)
    he_upto(x[j], std::span<double>(table.col(j).data(), static_cast<std::size_t>(k + 1)));
  Eigen::VectorXd h(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto t = idx.tuple(r);
    double prod = 1.0;
    std::size_t i = 0;
    while (i < t.size()) {
      std::size_t j = i;
      while (j < t.size() && t[j] == t[i]) ++j;
      prod *= table(static_cast<Eigen::Index>(j - i), t[i]);
      i = j;
    }
    h[static_cast<Eigen::Index>(r)] = prod;
  }
  return h;
}

inline Eigen::VectorXd hermite_features(const Eigen::VectorXd& x, int k) {
  return hermite_features(x, BasisIndexer(static_cast<int>(x.size()), k));
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Gauss rule for E[f(G)], G ~ N(0,1), via Golub-Welsch on the Jacobi matrix
/// of the probabilists' Hermite recurrence. Exact for polynomials of degree
/// <= 2n - 1.
inline QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw precondition_error("gauss_hermite: need at least one node");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) jac(i, i - 1) = jac(i - 1, i) = std::sqrt(double(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  return {es.eigenvalues(), es.eigenvectors().row(0).transpose().array().square()};
}

/// Gauss-Legendre rule on [a, b] (weights sum to b - a).
inline QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw precondition_error("gauss_legendre: need at least one node");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) jac(i, i - 1) = jac(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  const double half = 0.5 * (b - a);
  QuadratureRule rule;
  rule.nodes = (es.eigenvalues().array() * half + 0.5 * (a + b)).matrix();
  rule.weights = (2.0 * half) * es.eigenvectors().row(0).transpose().array().square();
  return rule;
}

// ---------------------------------------------------------------------------
// Activations and their Hermite coefficients
// ---------------------------------------------------------------------------

/// An activation sigma together with the truncation degree D used when
/// extracting Hermite coefficients.
struct ActivationSpec {
  enum class Kind { polynomial, relu, square };

  Kind kind = Kind::relu;
  /// Monomial coefficients c_0..c_m of sigma(x) = sum c_i x^i (polynomial only).
  std::vector<double> coefficients;
  int degree_cap = 8;

  static ActivationSpec relu(int degree_cap = 8) { return {Kind::relu, {}, degree_cap}; }
  static ActivationSpec square() { return {Kind::square, {}, 2}; }

  static ActivationSpec polynomial(std::vector<double> monomial_coeffs) {
    while (monomial_coeffs.size() > 1 && monomial_coeffs.back() == 0.0) monomial_coeffs.pop_back();
    const int deg = monomial_coeffs.empty() ? 0 : static_cast<int>(monomial_coeffs.size()) - 1;
    return {Kind::polynomial, std::move(monomial_coeffs), deg};
  }

  /// Polynomial sigma = sum_k mu_k He_k, converted to monomial form.
  static ActivationSpec from_hermite(const std::vector<double>& mu) {
    const std::size_t n = mu.size();
    std::vector<double> mono(std::max<std::size_t>(n, 1), 0.0);
    // He_k(x) = sqrt(k!) sum_i (-1)^i / (2^i i! (k-2i)!) x^{k-2i}
    for (std::size_t k = 0; k < n; ++k) {
      if (mu[k] == 0.0) continue;
      const int kk = static_cast<int>(k);
      for (int i = 0; 2 * i <= kk; ++i) {
        const double c = std::sqrt(factorial(kk)) * ((i % 2) ? -1.0 : 1.0) /
                         (std::pow(2.0, i) * factorial(i) * factorial(kk - 2 * i));
        mono[static_cast<std::size_t>(kk - 2 * i)] += mu[k] * c;
      }
    }
    return polynomial(std::move(mono));
  }

  int degree() const {
    switch (kind) {
      case Kind::polynomial: return static_cast<int>(coefficients.size()) - 1;
      case Kind::square: return 2;
      case Kind::relu: break;
    }
    return -1;
  }

  bool is_polynomial() const { return kind != Kind::relu; }

  double operator()(double x) const {
    switch (kind) {
      case Kind::relu: return x > 0.0 ? x : 0.0;
      case Kind::square: return x * x;
      case Kind::polynomial: break;
    }
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  std::string name() const {
    switch (kind) {
      case Kind::relu: return "relu";
      case Kind::square: return "square";
      case Kind::polynomial: break;
    }
    return "polynomial";
  }
};

/// Hermite coefficients mu_0..mu_D of an activation, and
/// mu_gt2 = sqrt(sum_{k>=3} mu_k^2).
struct HermiteCoeffs {
  Eigen::VectorXd mu;
  double mu_gt2 = 0.0;

  static HermiteCoeffs from(Eigen::VectorXd mu) {
    HermiteCoeffs h;
    h.mu = std::move(mu);
    h.mu_gt2 = h.mu.size() > 3 ? h.mu.tail(h.mu.size() - 3).norm() : 0.0;
    return h;
  }

  double operator[](int k) const { return k < mu.size() ? mu[k] : 0.0; }
  int degree() const { return static_cast<int>(mu.size()) - 1; }
};

namespace detail {
// Half-line rule for E[f(G) 1{G > 0}] with smooth f.
inline const QuadratureRule& half_line_rule() {
  static const QuadratureRule rule = [] {
    QuadratureRule r = gauss_legendre(200, 0.0, 12.0);
    const double c = 1.0 / std::sqrt(2.0 * M_PI);
    r.weights = (r.weights.array() * c * (-0.5 * r.nodes.array().square()).exp()).matrix();
    return r;
  }();
  return rule;
}
}  // namespace detail

/// mu_k = E[sigma(G) He_k(G)]. Polynomial activations use a Gauss-Hermite
/// rule with ceil((D+k)/2)+1 nodes (exact up to rounding). relu, whose kink
/// at 0 stalls Gauss-Hermite convergence, is integrated on the half line
/// with a 200-node Gauss-Legendre rule on [0, 12].
inline double hermite_coeff(const ActivationSpec& sigma, int k) {
  if (k < 0 || k > sigma.degree_cap)
    throw order_error("hermite_coeff: order " + std::to_string(k) + " exceeds degree cap " +
                      std::to_string(sigma.degree_cap));
  if (sigma.kind == ActivationSpec::Kind::relu) {
    const auto& rule = detail::half_line_rule();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
      acc += rule.weights[i] * rule.nodes[i] * he(k, rule.nodes[i]);
    return acc;
  }
  const int deg = sigma.degree();
  const int nodes = (deg + k + 1) / 2 + 1;
  const QuadratureRule rule = gauss_hermite(nodes);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * sigma(rule.nodes[i]) * he(k, rule.nodes[i]);
  return acc;
}

inline HermiteCoeffs hermite_coeffs(const ActivationSpec& sigma) {
  Eigen::VectorXd mu(sigma.degree_cap + 1);
  for (int k = 0; k <= sigma.degree_cap; ++k) mu[k] = hermite_coeff(sigma, k);
  return HermiteCoeffs::from(std::move(mu));
}

}  // namespace chaoslab
