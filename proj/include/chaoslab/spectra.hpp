#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaoslab/error.hpp"
#include "chaoslab/hermite.hpp"
#include "chaoslab/models.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab {

/// Largest dimension for which V_k is materialized.
inline constexpr int kMaxMaterializeDim = 16;

struct SpectraCaps {
  Eigen::Index max_p = 4096;  // power-iteration cap on p
  double v2_centered = 5.0;   // ||V_2c||_op
  double order3 = 2.0;
  double order4 = 2.0;
  double order5 = 1.0;
};

/// ||A||_op of a symmetric or rectangular matrix by power iteration on A^T A,
/// to `rtol` relative change, keeping the best of `restarts` random starts.
inline double op_norm(const Eigen::MatrixXd& a, std::uint64_t seed = 1, double rtol = 1e-6, int max_iter = 20000,
                      int restarts = 2) {
  if (a.size() == 0) return 0.0;
  Rng rng(seed);
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd v = rng.normal_vector(a.cols()).normalized();
    double prev = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd w = a.transpose() * (a * v);
      const double lam = w.norm();
      if (lam == 0.0) break;
      v = w / lam;
      if (std::abs(lam - prev) <= rtol * lam) {
        prev = lam;
        break;
      }
      prev = lam;
    }
    best = std::max(best, std::sqrt(prev));
  }
  return best;
}

/// V_k with rows q_k(w_j); only for d <= 16.
inline Eigen::MatrixXd materialize_vk(const WeightEnsemble& we, int k) {
  if (we.d() > kMaxMaterializeDim) throw capacity_error("materialize_vk: d too large to materialize V_k");
  if (k < 1 || k > 4) throw order_error("materialize_vk: orders 1..4");
  Eigen::MatrixXd v(we.p(), static_cast<Eigen::Index>(basis_dim(we.d(), k)));
  for (int j = 0; j < we.p(); ++j) v.row(j) = q_k(we.matrix().row(j).transpose(), k).transpose();
  return v;
}

/// max |V_k V_k^T - (W W^T)^{.k}|
inline double gram_hadamard_check(const WeightEnsemble& we, int k) {
  const Eigen::MatrixXd v = materialize_vk(we, k);
  const Eigen::MatrixXd g = we.matrix() * we.matrix().transpose();
  if (k == 1) return (v * v.transpose() - g).cwiseAbs().maxCoeff();
  return (v * v.transpose() - g.array().pow(k).matrix()).cwiseAbs().maxCoeff();
}

struct SpikeDecomposition {
  double centered_op = 0.0;  // ||V_2 - (1/d) 1 e_c^T||_op
  double spike_op = 0.0;     // sqrt(p / d)
  double full_op = 0.0;      // ||V_2||_op
};

/// Splits V_2 into its mean row (1/d) e_c, e_c the indicator of the diagonal
/// multi-indices, and the centered remainder.
inline SpikeDecomposition v2_spike_decomposition(const WeightEnsemble& we, const SpectraCaps& caps = {},
                                                 std::uint64_t seed = 1) {
  if (we.p() > caps.max_p) throw capacity_error("v2_spike_decomposition: p above the power-iteration cap");
  const int d = we.d();
  Eigen::MatrixXd v = we.v2();
  const BasisIndexer idx(d, 2);
  Eigen::VectorXd ec = Eigen::VectorXd::Zero(v.cols());
  for (int i = 0; i < d; ++i) {
    const int pair[2] = {i, i};
    ec[static_cast<Eigen::Index>(idx.rank(std::span<const int>(pair, 2)))] = 1.0;
  }
  SpikeDecomposition s;
  s.full_op = op_norm(v, seed);
  v.rowwise() -= ec.transpose() / d;
  s.centered_op = op_norm(v, seed + 1);
  s.spike_op = std::sqrt(static_cast<double>(we.p()) / d);
  return s;
}

/// ||(W W^T)^{.k} - I - correction||_op with correction (3/d) W W^T for
/// k = 3, (3/d^2) 1 1^T for k = 4, and none for k = 5.
inline double higher_gram_structure(const WeightEnsemble& we, int k, const SpectraCaps& caps = {},
                                    std::uint64_t seed = 1) {
  if (k < 3 || k > 5) throw order_error("higher_gram_structure: orders 3..5");
  if (we.p() > caps.max_p) throw capacity_error("higher_gram_structure: p above the power-iteration cap");
  const double d = we.d();
  const Eigen::MatrixXd g = we.matrix() * we.matrix().transpose();
  Eigen::MatrixXd r = g.array().pow(k).matrix();
  r.diagonal().array() -= 1.0;
  if (k == 3) r -= (3.0 / d) * g;
  if (k == 4) r.array() -= 3.0 / (d * d);
  return op_norm(r, seed);
}

/// Full diagnostic report for one weight ensemble.
inline nlohmann::json spectra_report(const WeightEnsemble& we, const SpectraCaps& caps = {}, std::uint64_t seed = 1) {
  nlohmann::json j;
  j["d"] = we.d();
  j["p"] = we.p();
  if (we.d() <= kMaxMaterializeDim) {
    nlohmann::json gh;
    for (int k = 1; k <= 4; ++k) gh[std::to_string(k)] = gram_hadamard_check(we, k);
    j["gram_hadamard_residual"] = gh;
  }
  if (we.p() <= caps.max_p) {
    const auto s = v2_spike_decomposition(we, caps, seed);
    j["v2"] = {{"centered_op", s.centered_op},
               {"spike_op", s.spike_op},
               {"full_op", s.full_op},
               {"cap", caps.v2_centered},
               {"pass", s.centered_op <= caps.v2_centered}};
    const double cap[3] = {caps.order3, caps.order4, caps.order5};
    for (int k = 3; k <= 5; ++k) {
      const double r = higher_gram_structure(we, k, caps, seed);
      j["higher_gram"][std::to_string(k)] = {{"residual_op", r}, {"cap", cap[k - 3]}, {"pass", r <= cap[k - 3]}};
    }
  }
  return j;
}

}  // namespace chaoslab
