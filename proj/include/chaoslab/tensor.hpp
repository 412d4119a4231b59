#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaoslab/error.hpp"
#include "chaoslab/hermite.hpp"

namespace chaoslab {

/// Dense order-k tensor over R^d stored row-major in d^k doubles.
///
/// Elements of the symmetric space (R^d)^{sym k} are held in this dense
/// layout (redundant entries included); symmetric() checks the invariant.
/// Partial contractions of symmetric tensors are generally not symmetric,
/// so the same type carries both.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int order, int dim) : order_(order), dim_(dim) {
    if (order < 0 || dim < 1) throw precondition_error("Tensor: bad shape");
    std::size_t n = 1;
    for (int i = 0; i < order; ++i) n *= static_cast<std::size_t>(dim);
    data_.assign(n, 0.0);
  }

  int order() const { return order_; }
  int dim() const { return dim_; }
  std::size_t size() const { return data_.size(); }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  template <typename Coords>
  std::size_t offset(const Coords& idx) const {
    std::size_t off = 0;
    for (int i : idx) off = off * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
    return off;
  }

  double& at(std::initializer_list<int> idx) { return data_[offset(idx)]; }
  double at(std::initializer_list<int> idx) const { return data_[offset(idx)]; }

  /// Unflattens a row-major offset into coordinates.
  std::vector<int> coords(std::size_t flat) const {
    std::vector<int> c(static_cast<std::size_t>(order_));
    for (int i = order_ - 1; i >= 0; --i) {
      c[static_cast<std::size_t>(i)] = static_cast<int>(flat % static_cast<std::size_t>(dim_));
      flat /= static_cast<std::size_t>(dim_);
    }
    return c;
  }

  double frobenius_norm() const {
    return std::sqrt(std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0));
  }

  /// Order-2 tensor viewed as a d x d matrix.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> matrix()
      const {
    if (order_ != 2) throw order_error("Tensor::matrix: order must be 2");
    return {data_.data(), dim_, dim_};
  }

  /// Max deviation over all index transpositions (adjacent swaps generate S_k).
  double symmetry_defect() const {
    double worst = 0.0;
    for (std::size_t f = 0; f < data_.size(); ++f) {
      auto c = coords(f);
      for (int a = 0; a + 1 < order_; ++a) {
        std::swap(c[static_cast<std::size_t>(a)], c[static_cast<std::size_t>(a + 1)]);
        worst = std::max(worst, std::abs(data_[f] - data_[offset(c)]));
        std::swap(c[static_cast<std::size_t>(a)], c[static_cast<std::size_t>(a + 1)]);
      }
    }
    return worst;
  }

  bool symmetric(double tol = 1e-12) const { return symmetry_defect() <= tol; }

 private:
  int order_ = 0;
  int dim_ = 1;
  std::vector<double> data_{0.0};
};

inline double inner(const Tensor& a, const Tensor& b) {
  if (a.order() != b.order() || a.dim() != b.dim()) throw precondition_error("inner: shape mismatch");
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

/// iota: R^{B_{d,k}} -> (R^d)^{sym k}, entry at index tuple i equal to
/// multinomial(type(i))^{-1/2} v_{type(i)}. An isometry.
inline Tensor iota(const Eigen::VectorXd& v, int k, int d) {
  const BasisIndexer idx(d, k);
  if (static_cast<std::size_t>(v.size()) != idx.size())
    throw precondition_error("iota: coefficient length does not match B_{d,k}");
  Tensor t(k, d);
  for (std::size_t f = 0; f < t.size(); ++f) {
    const auto c = t.coords(f);
    const std::size_t r = idx.rank(c);
    t[f] = v[static_cast<Eigen::Index>(r)] / std::sqrt(idx.multinomial(r));
  }
  return t;
}

/// Left inverse of iota on symmetric tensors (symmetrizes first).
inline Eigen::VectorXd iota_inverse(const Tensor& t) {
  const BasisIndexer idx(t.dim(), t.order());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t f = 0; f < t.size(); ++f) v[static_cast<Eigen::Index>(idx.rank(t.coords(f)))] += t[f];
  for (std::size_t r = 0; r < idx.size(); ++r) v[static_cast<Eigen::Index>(r)] /= std::sqrt(idx.multinomial(r));
  return v;
}

/// w^{otimes k}
inline Tensor outer_power(const Eigen::VectorXd& w, int k) {
  Tensor t(k, static_cast<int>(w.size()));
  for (std::size_t f = 0; f < t.size(); ++f) {
    double prod = 1.0;
    for (int i : t.coords(f)) prod *= w[i];
    t[f] = prod;
  }
  return t;
}

/// Partial contraction S (x)_r T: the last r indices of S are summed against
/// the first r indices of T, giving an order k + l - 2r tensor with the free
/// indices of S first. r = 0 is the tensor product.
inline Tensor contract(const Tensor& s, const Tensor& t, int r) {
  if (s.dim() != t.dim()) throw precondition_error("contract: dimension mismatch");
  if (r < 0 || r > std::min(s.order(), t.order())) throw precondition_error("contract: r out of range");
  const int d = s.dim();
  std::size_t shared = 1;
  for (int i = 0; i < r; ++i) shared *= static_cast<std::size_t>(d);
  const std::size_t left = s.size() / shared;
  const std::size_t right = t.size() / shared;
  // As matrices: S is (left x shared), T is (shared x right), both row-major.
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> sm(s.data().data(), static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(shared));
  Eigen::Map<const RowMat> tm(t.data().data(), static_cast<Eigen::Index>(shared), static_cast<Eigen::Index>(right));
  Tensor out(s.order() + t.order() - 2 * r, d);
  Eigen::Map<RowMat> om(out.data().data(), static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(right));
  om.noalias() = sm * tm;
  return out;
}

/// <T, H_k(x)> for symmetric T of order k <= 3, where H_k = iota(h_k).
inline double monic_chaos_eval(const Tensor& t, const Eigen::VectorXd& x) {
  const int d = t.dim();
  if (x.size() != d) throw precondition_error("monic_chaos_eval: dimension mismatch");
  const auto& a = t.data();
  switch (t.order()) {
    case 1:
      return Eigen::Map<const Eigen::VectorXd>(a.data(), d).dot(x);
    case 2: {
      const auto m = t.matrix();
      return (x.dot(m * x) - m.trace()) / std::sqrt(2.0);
    }
    case 3: {
      double cubic = 0.0;
      double trace_term = 0.0;
      std::size_t f = 0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double row = 0.0;
          for (int k = 0; k < d; ++k, ++f) row += a[f] * x[k];
          cubic += x[i] * x[j] * row;
          if (i == j)
            for (int k = 0; k < d; ++k) trace_term += a[(static_cast<std::size_t>(i) * d + i) * d + k] * x[k];
        }
      return (cubic - 3.0 * trace_term) / std::sqrt(6.0);
    }
    default:
      break;
  }
  throw order_error("monic_chaos_eval: only orders 1..3 are supported");
}

/// E[prod_i He_{k_i}(<w_i, x>)] for x ~ N(0, I): sum over loopless
/// multigraphs with degree sequence (k_i) of prod_{i<j} <w_i,w_j>^nu / nu!,
/// scaled by prod_i sqrt(k_i!).
inline double wick_product_mean(const std::vector<std::pair<int, Eigen::VectorXd>>& factors) {
  const int m = static_cast<int>(factors.size());
  int total = 0;
  for (const auto& [k, w] : factors) {
    if (k < 0) throw order_error("wick_product_mean: negative degree");
    total += k;
  }
  if (m > 4 || total > 24) throw capacity_error("wick_product_mean: at most 4 factors of total degree 24");
  if (m == 0) return 1.0;
  if (total % 2) return 0.0;

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) edges.emplace_back(i, j);
  Eigen::MatrixXd gram(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) gram(i, j) = factors[i].second.dot(factors[j].second);

  std::vector<int> remaining(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) remaining[static_cast<std::size_t>(i)] = factors[static_cast<std::size_t>(i)].first;

  // Depth-first over edge multiplicities.
  double sum = 0.0;
  auto recurse = [&](auto&& self, std::size_t e, double val) -> void {
    if (e == edges.size()) {
      for (int r : remaining)
        if (r != 0) return;
      sum += val;
      return;
    }
    const auto [i, j] = edges[e];
    const int cap = std::min(remaining[static_cast<std::size_t>(i)], remaining[static_cast<std::size_t>(j)]);
    double term = val;
    for (int nu = 0; nu <= cap; ++nu) {
      if (nu > 0) term *= gram(i, j) / nu;
      remaining[static_cast<std::size_t>(i)] -= nu;
      remaining[static_cast<std::size_t>(j)] -= nu;
      self(self, e + 1, term);
      remaining[static_cast<std::size_t>(i)] += nu;
      remaining[static_cast<std::size_t>(j)] += nu;
    }
  };
  recurse(recurse, 0, 1.0);

  double scale = 1.0;
  for (const auto& [k, w] : factors) scale *= std::sqrt(factorial(k));
  return scale * sum;
}

}  // namespace chaoslab
