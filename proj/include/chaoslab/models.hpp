#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaoslab/error.hpp"
#include "chaoslab/hermite.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// Weight matrix with rows uniform on S^{d-1}, plus cached projections on
/// declared signal directions: r1 = W u and r2 = (<w_j, u>^2)_j.
class WeightEnsemble {
 public:
  WeightEnsemble(Eigen::MatrixXd w, std::uint64_t seed) : w_(std::move(w)), seed_(seed) {
    for (Eigen::Index j = 0; j < w_.rows(); ++j)
      if (std::abs(w_.row(j).norm() - 1.0) > 1e-10) throw precondition_error("WeightEnsemble: rows must be unit vectors");
  }

  const Eigen::MatrixXd& matrix() const { return w_; }
  int d() const { return static_cast<int>(w_.cols()); }
  int p() const { return static_cast<int>(w_.rows()); }
  std::uint64_t seed() const { return seed_; }

  void add_direction(const Eigen::VectorXd& u) {
    if (u.size() != w_.cols()) throw precondition_error("add_direction: dimension mismatch");
    if (std::abs(u.norm() - 1.0) > 1e-10) throw precondition_error("add_direction: u must be a unit vector");
    directions_.push_back(u);
    r1_.push_back(w_ * u);
    r2_.push_back(r1_.back().array().square().matrix());
  }

  std::size_t direction_count() const { return directions_.size(); }
  const Eigen::VectorXd& direction(std::size_t i) const { return directions_.at(i); }
  const Eigen::VectorXd& r1(std::size_t i) const { return r1_.at(i); }
  const Eigen::VectorXd& r2(std::size_t i) const { return r2_.at(i); }

  /// V_2 = q_2(W) in R^{p x B_{d,2}}, rows in the shared basis ordering.
  Eigen::MatrixXd v2() const {
    const BasisIndexer idx(d(), 2);
    Eigen::MatrixXd v(w_.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto t = idx.tuple(r);
      const double scale = t[0] == t[1] ? 1.0 : std::sqrt(2.0);
      v.col(static_cast<Eigen::Index>(r)) = scale * w_.col(t[0]).cwiseProduct(w_.col(t[1]));
    }
    return v;
  }

 private:
  Eigen::MatrixXd w_;
  std::uint64_t seed_;
  std::vector<Eigen::VectorXd> directions_;
  std::vector<Eigen::VectorXd> r1_;
  std::vector<Eigen::VectorXd> r2_;
};

/// Rows are independent normalized standard Gaussian vectors.
inline WeightEnsemble sample_weights(int d, int p, std::uint64_t seed) {
  if (d < 1 || p < 1) throw precondition_error("sample_weights: d and p must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd w(p, d);
  for (int j = 0; j < p; ++j) w.row(j) = rng.unit_vector(d).transpose();
  return {std::move(w), seed};
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// One chaos coordinate xi = <beta, h_k(x)> with ||beta|| = 1.
class ChaosCoordinate {
 public:
  enum class Source { explicit_coeffs, rank_one, uniform_sphere };

  static ChaosCoordinate explicit_coeffs(int k, Eigen::VectorXd beta) {
    if (k < 2 || k > 3) throw order_error("ChaosCoordinate: dense coefficients support orders 2 and 3");
    if (std::abs(beta.norm() - 1.0) > 1e-8) throw precondition_error("ChaosCoordinate: coefficients must have unit norm");
    ChaosCoordinate c;
    c.order_ = k;
    c.source_ = Source::explicit_coeffs;
    c.beta_ = std::move(beta);
    c.dim_ = infer_dim(k, c.beta_.size());
    return c;
  }

  static ChaosCoordinate rank_one(int k, Eigen::VectorXd u) {
    if (k < 2 || k > 4) throw order_error("ChaosCoordinate: rank-one coordinates support orders 2..4");
    if (std::abs(u.norm() - 1.0) > 1e-8) throw precondition_error("ChaosCoordinate: direction must have unit norm");
    ChaosCoordinate c;
    c.order_ = k;
    c.source_ = Source::rank_one;
    c.dim_ = static_cast<int>(u.size());
    c.u_ = std::move(u);
    return c;
  }

  /// beta uniform on the unit sphere of R^{B_{d,k}}.
  static ChaosCoordinate uniform_sphere(int k, int d, std::uint64_t seed) {
    if (k < 2 || k > 3) throw order_error("ChaosCoordinate: uniform-sphere coefficients support orders 2 and 3");
    Rng rng(seed);
    ChaosCoordinate c = explicit_coeffs(k, rng.unit_vector(static_cast<Eigen::Index>(basis_dim(d, k))));
    c.source_ = Source::uniform_sphere;
    c.seed_ = seed;
    return c;
  }

  int order() const { return order_; }
  int dim() const { return dim_; }
  Source source() const { return source_; }
  bool is_rank_one() const { return source_ == Source::rank_one; }
  const Eigen::VectorXd& direction() const { return u_; }
  std::uint64_t seed() const { return seed_; }

  /// Dense coefficient vector (materialized from q_k(u) for rank-one).
  Eigen::VectorXd coefficients() const { return is_rank_one() ? q_k(u_, order_) : beta_; }

  /// Symmetric-tensor form iota(beta).
  Tensor tensor() const { return is_rank_one() ? outer_power(u_, order_) : iota(beta_, order_, dim_); }

  double evaluate(const Eigen::VectorXd& x, const BasisIndexer* idx = nullptr) const {
    if (is_rank_one()) return he(order_, u_.dot(x));
    if (idx) return beta_.dot(hermite_features(x, *idx));
    return beta_.dot(hermite_features(x, order_));
  }

  /// <beta_a, beta_b> (zero across different orders).
  friend double gram(const ChaosCoordinate& a, const ChaosCoordinate& b) {
    if (a.order_ != b.order_) return 0.0;
    if (a.is_rank_one() && b.is_rank_one()) return std::pow(a.u_.dot(b.u_), a.order_);
    if (a.is_rank_one()) return b.beta_.dot(q_k(a.u_, a.order_));
    if (b.is_rank_one()) return a.beta_.dot(q_k(b.u_, b.order_));
    return a.beta_.dot(b.beta_);
  }

 private:
  static int infer_dim(int k, Eigen::Index len) {
    for (int d = 1; d <= 4096; ++d) {
      const auto b = static_cast<Eigen::Index>(basis_dim(d, k));
      if (b == len) return d;
      if (b > len) break;
    }
    throw precondition_error("ChaosCoordinate: coefficient length is not B_{d,k} for any d");
  }

  int order_ = 2;
  int dim_ = 1;
  Source source_ = Source::explicit_coeffs;
  Eigen::VectorXd beta_;
  Eigen::VectorXd u_;
  std::uint64_t seed_ = 0;
};

/// <beta_a, beta_b>, exact for rank-one pairs.
double gram(const ChaosCoordinate& a, const ChaosCoordinate& b);

/// Response map y = out(pre(f) + eps).
///
/// pre is either an affine form offset + <weights, f> or a Hermite series
/// sum_k c_k He_k(f_0) of the single coordinate f_0; out is identity, sign,
/// or a logistic draw with P(y = +1) = 1 / (1 + exp(-scale * r)).
struct LinkSpec {
  enum class Pre { weighted_sum, hermite_single_index };
  enum class Out { identity, sign, logistic };

  Pre pre = Pre::weighted_sum;
  Out out = Out::identity;
  double offset = 0.0;
  std::vector<double> weights;       // weighted_sum; empty means all ones
  std::vector<double> hermite;       // hermite_single_index: c_0..c_K
  double scale = 1.0;                // logistic s_*

  static LinkSpec identity_sum(std::vector<double> w = {}, double offset = 0.0) {
    LinkSpec l;
    l.weights = std::move(w);
    l.offset = offset;
    return l;
  }
  static LinkSpec sign_of_sum(std::vector<double> w = {}, double offset = 0.0) {
    LinkSpec l = identity_sum(std::move(w), offset);
    l.out = Out::sign;
    return l;
  }
  static LinkSpec logistic_sign(double scale, std::vector<double> w = {}, double offset = 0.0) {
    LinkSpec l = identity_sum(std::move(w), offset);
    l.out = Out::logistic;
    l.scale = scale;
    return l;
  }
  static LinkSpec hermite_poly(std::vector<double> coeffs, Out out = Out::identity, double scale = 1.0) {
    LinkSpec l;
    l.pre = Pre::hermite_single_index;
    l.hermite = std::move(coeffs);
    l.out = out;
    l.scale = scale;
    return l;
  }

  bool binary() const { return out != Out::identity; }

  double response(const Eigen::Ref<const Eigen::VectorXd>& f) const {
    if (pre == Pre::hermite_single_index) {
      double acc = 0.0;
      for (std::size_t k = 0; k < hermite.size(); ++k) acc += hermite[k] * he(static_cast<int>(k), f[0]);
      return acc;
    }
    if (weights.empty()) return offset + f.sum();
    double acc = offset;
    for (Eigen::Index i = 0; i < f.size(); ++i) acc += weights[static_cast<std::size_t>(i)] * f[i];
    return acc;
  }

  /// `uniform` is a U(0,1) draw consumed only by the logistic output.
  double label(double r, double uniform) const {
    switch (out) {
      case Out::identity: return r;
      case Out::sign: return r >= 0.0 ? 1.0 : -1.0;
      case Out::logistic: break;
    }
    const double prob = 1.0 / (1.0 + std::exp(-scale * r));
    return uniform < prob ? 1.0 : -1.0;
  }

  void check_arity(int m) const {
    if (pre == Pre::hermite_single_index && m != 1)
      throw precondition_error("LinkSpec: Hermite single-index link needs exactly one latent coordinate");
    if (pre == Pre::weighted_sum && !weights.empty() && static_cast<int>(weights.size()) != m)
      throw precondition_error("LinkSpec: weight count does not match latent arity");
  }
};

struct NoiseSpec {
  enum class Kind { none, gaussian, uniform };
  Kind kind = Kind::none;
  double scale = 0.0;  // sd for gaussian, half-width for uniform

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double sd) { return {Kind::gaussian, sd}; }
  static NoiseSpec uniform(double half_width) { return {Kind::uniform, half_width}; }

  double draw(Rng& rng) const {
    switch (kind) {
      case Kind::none: return 0.0;
      case Kind::gaussian: return scale * rng.normal();
      case Kind::uniform: return scale * (2.0 * rng.uniform() - 1.0);
    }
    return 0.0;
  }
};

/// f_*(x) = {x_1..x_s, xi_1, ..., xi_M} with the linear coordinates on the
/// canonical support S = {1..s}.
struct TargetSpec {
  int s = 0;
  std::vector<ChaosCoordinate> higher;
  LinkSpec link;
  NoiseSpec noise;

  int m() const { return s + static_cast<int>(higher.size()); }

  void validate(int d) const {
    if (s < 0 || s > d) throw precondition_error("TargetSpec: support size must lie in [0, d]");
    for (const auto& c : higher) {
      if (c.dim() != d) throw precondition_error("TargetSpec: chaos coordinate dimension mismatch");
      if (c.is_rank_one() ? c.order() > 4 : c.order() > 3) throw order_error("TargetSpec: unsupported chaos order");
    }
    link.check_arity(m());
  }
};

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

enum class ModelTag { RF, GE, PGE, CGE };

inline const char* to_string(ModelTag t) {
  switch (t) {
    case ModelTag::RF: return "RF";
    case ModelTag::GE: return "GE";
    case ModelTag::PGE: return "PGE";
    case ModelTag::CGE: return "CGE";
  }
  return "?";
}

inline ModelTag parse_model_tag(const std::string& s) {
  if (s == "RF") return ModelTag::RF;
  if (s == "GE") return ModelTag::GE;
  if (s == "PGE") return ModelTag::PGE;
  if (s == "CGE") return ModelTag::CGE;
  throw precondition_error("unknown model tag: " + s);
}

/// n samples: features Z (p x n), latent signals F (m x n), labels y.
struct SampleBatch {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd F;
  Eigen::VectorXd y;
  ModelTag model_tag = ModelTag::RF;
  int d = 0;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return Z.cols(); }
  Eigen::Index p() const { return Z.rows(); }
  Eigen::Index m() const { return F.rows(); }
};

namespace detail {

// Draw order shared by all samplers so that paths coincide where the models
// do: base Gaussian block (d x n), label noise (n), label uniforms (n), then
// model-specific blocks. RF/PGE use the base block as x; GE/CGE as g_1.
struct BaseDraws {
  Eigen::MatrixXd x;
  Eigen::VectorXd eps;
  Eigen::VectorXd uniforms;
};

inline BaseDraws draw_base(Rng& rng, int d, Eigen::Index n, const NoiseSpec& noise) {
  BaseDraws b;
  b.x = rng.normal_matrix(d, n);
  b.eps.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) b.eps[i] = noise.draw(rng);
  b.uniforms.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) b.uniforms[i] = rng.uniform();
  return b;
}

inline Eigen::VectorXd labels(const TargetSpec& t, const Eigen::MatrixXd& f, const BaseDraws& b) {
  Eigen::VectorXd y(f.cols());
  for (Eigen::Index i = 0; i < f.cols(); ++i) y[i] = t.link.label(t.link.response(f.col(i)) + b.eps[i], b.uniforms[i]);
  return y;
}

inline std::vector<std::size_t> coords_of_order_at_least(const TargetSpec& t, int k) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < t.higher.size(); ++i)
    if (t.higher[i].order() >= k) out.push_back(i);
  return out;
}

/// Gaussian surrogates for the chaos coordinates listed in `which`, with
/// covariance Gram <beta_i, beta_j> (block diagonal across orders).
inline Eigen::MatrixXd gaussian_surrogates(const TargetSpec& t, const std::vector<std::size_t>& which,
                                           Eigen::Index n, Rng& rng) {
  const auto m = static_cast<Eigen::Index>(which.size());
  if (m == 0) return Eigen::MatrixXd(0, n);
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b <= a; ++b) g(a, b) = g(b, a) = gram(t.higher[which[a]], t.higher[which[b]]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw coefficient_error("Gram matrix of higher-order chaos coefficients is not positive semidefinite");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = es.eigenvectors() * root.asDiagonal();
  return factor * rng.normal_matrix(m, n);
}

inline void check_support(const WeightEnsemble& we, const TargetSpec& t) { t.validate(we.d()); }

inline Eigen::MatrixXd order2_values_from(const TargetSpec& t, const Eigen::MatrixXd& g2, std::size_t i) {
  return (t.higher[i].coefficients().transpose() * g2);
}

}  // namespace detail

/// sigma(W X) for the columns of X.
inline Eigen::MatrixXd rf_features(const WeightEnsemble& we, const ActivationSpec& sigma, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = we.matrix() * x;
  if (sigma.kind == ActivationSpec::Kind::relu)
    z = z.cwiseMax(0.0);
  else
    z = z.unaryExpr([&](double v) { return sigma(v); });
  return z;
}

/// Latent f_*(x) for the columns of X under the exact chaos expansion.
inline Eigen::MatrixXd latent_exact(const TargetSpec& t, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.cols();
  Eigen::MatrixXd f(t.m(), n);
  if (t.s > 0) f.topRows(t.s) = x.topRows(t.s);
  const int d = static_cast<int>(x.rows());
  for (std::size_t i = 0; i < t.higher.size(); ++i) {
    const auto& c = t.higher[i];
    const auto row = static_cast<Eigen::Index>(t.s + static_cast<int>(i));
    if (c.is_rank_one()) {
      const Eigen::VectorXd proj = x.transpose() * c.direction();
      for (Eigen::Index j = 0; j < n; ++j) f(row, j) = he(c.order(), proj[j]);
    } else {
      const BasisIndexer idx(d, c.order());
      const Eigen::VectorXd beta = c.coefficients();
      for (Eigen::Index j = 0; j < n; ++j) f(row, j) = beta.dot(hermite_features(x.col(j), idx));
    }
  }
  return f;
}

/// Random-feature model: z = sigma(W x), x ~ N(0, I_d), exact latent.
inline SampleBatch rf_batch(const WeightEnsemble& we, const TargetSpec& target, const ActivationSpec& sigma,
                            Eigen::Index n, std::uint64_t seed) {
  detail::check_support(we, target);
  Rng rng(seed);
  auto base = detail::draw_base(rng, we.d(), n, target.noise);
  SampleBatch b;
  b.model_tag = ModelTag::RF;
  b.d = we.d();
  b.seed = seed;
  b.Z = rf_features(we, sigma, base.x);
  b.F = latent_exact(target, base.x);
  b.y = detail::labels(target, b.F, base);
  return b;
}

namespace detail {

enum class GaussianFlavor { ge, cge };

// Shared by GE and CGE. With s = 0 both flavors consume identical draws and
// produce identical batches.
inline SampleBatch gaussian_batch(const WeightEnsemble& we, const TargetSpec& target, const HermiteCoeffs& mu,
                                  Eigen::Index n, std::uint64_t seed, GaussianFlavor flavor) {
  check_support(we, target);
  const int d = we.d();
  const int p = we.p();
  Rng rng(seed);
  auto base = draw_base(rng, d, n, target.noise);
  const Eigen::MatrixXd& g1 = base.x;
  const auto b2 = static_cast<Eigen::Index>(basis_dim(d, 2));
  Eigen::MatrixXd g2 = rng.normal_matrix(b2, n);
  Eigen::MatrixXd gstar = rng.normal_matrix(p, n);
  const auto high = coords_of_order_at_least(target, 3);
  Eigen::MatrixXd surrogate = gaussian_surrogates(target, high, n, rng);

  SampleBatch b;
  b.model_tag = flavor == GaussianFlavor::ge ? ModelTag::GE : ModelTag::CGE;
  b.d = d;
  b.seed = seed;

  // Latent: x_S := g_1 restricted to S, <beta_2, g_2> over the full g_2.
  b.F.resize(target.m(), n);
  if (target.s > 0) b.F.topRows(target.s) = g1.topRows(target.s);
  std::size_t next_high = 0;
  for (std::size_t i = 0; i < target.higher.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(target.s + static_cast<int>(i));
    if (target.higher[i].order() == 2)
      b.F.row(row) = order2_values_from(target, g2, i);
    else
      b.F.row(row) = surrogate.row(static_cast<Eigen::Index>(next_high++));
  }
  b.y = labels(target, b.F, base);

  // Features. For CGE the S-supported block of g_2 (a prefix in the shared
  // ordering) is replaced by h_2(x_S); this is V_{2,S} h_2(x_S) + V_2 P_perp g_2.
  Eigen::MatrixXd g2_features;
  const Eigen::MatrixXd* g2_used = &g2;
  if (flavor == GaussianFlavor::cge && target.s > 0) {
    g2_features = g2;
    const BasisIndexer idx_s(target.s, 2);
    for (Eigen::Index j = 0; j < n; ++j)
      g2_features.col(j).head(static_cast<Eigen::Index>(idx_s.size())) =
          hermite_features(g1.col(j).head(target.s), idx_s);
    g2_used = &g2_features;
  }
  b.Z.noalias() = mu[1] * (we.matrix() * g1);
  if (mu[2] != 0.0) b.Z.noalias() += mu[2] * (we.v2() * *g2_used);
  b.Z.array() += mu[0];
  if (mu.mu_gt2 != 0.0) b.Z.noalias() += mu.mu_gt2 * gstar;
  return b;
}

}  // namespace detail

/// Quadratic-scaling Gaussian equivalent:
/// z = mu_0 1 + mu_1 W g_1 + mu_2 V_2 g_2 + mu_{>2} g_*.
inline SampleBatch ge_batch_quadratic(const WeightEnsemble& we, const TargetSpec& target, const HermiteCoeffs& mu,
                                      Eigen::Index n, std::uint64_t seed) {
  return detail::gaussian_batch(we, target, mu, n, seed, detail::GaussianFlavor::ge);
}

/// Conditional Gaussian equivalent: exact order-1/2 dependence on x_S, every
/// direction orthogonal to S Gaussianized.
inline SampleBatch cge_batch(const WeightEnsemble& we, const TargetSpec& target, const HermiteCoeffs& mu,
                             Eigen::Index n, std::uint64_t seed) {
  return detail::gaussian_batch(we, target, mu, n, seed, detail::GaussianFlavor::cge);
}

/// Partial Gaussian equivalent: chaos orders <= 2 exact, orders >= 3 of both
/// features and latent replaced by independent Gaussians.
inline SampleBatch pge_batch(const WeightEnsemble& we, const TargetSpec& target, const HermiteCoeffs& mu,
                             Eigen::Index n, std::uint64_t seed) {
  detail::check_support(we, target);
  const int p = we.p();
  Rng rng(seed);
  auto base = detail::draw_base(rng, we.d(), n, target.noise);
  Eigen::MatrixXd gstar = rng.normal_matrix(p, n);
  const auto high = detail::coords_of_order_at_least(target, 3);
  Eigen::MatrixXd surrogate = detail::gaussian_surrogates(target, high, n, rng);

  SampleBatch b;
  b.model_tag = ModelTag::PGE;
  b.d = we.d();
  b.seed = seed;
  b.F.resize(target.m(), n);
  if (target.s > 0) b.F.topRows(target.s) = base.x.topRows(target.s);
  std::size_t next_high = 0;
  for (std::size_t i = 0; i < target.higher.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(target.s + static_cast<int>(i));
    const auto& c = target.higher[i];
    if (c.order() == 2) {
      TargetSpec single;
      single.higher = {c};
      b.F.row(row) = latent_exact(single, base.x).row(0);
    } else {
      b.F.row(row) = surrogate.row(static_cast<Eigen::Index>(next_high++));
    }
  }
  b.y = detail::labels(target, b.F, base);

  const Eigen::MatrixXd proj = we.matrix() * base.x;
  const double mu0 = mu[0], mu1 = mu[1], mu2 = mu[2];
  b.Z = proj.unaryExpr([&](double t) { return mu0 + mu1 * t + mu2 * (t * t - 1.0) / std::sqrt(2.0); });
  if (mu.mu_gt2 != 0.0) b.Z.noalias() += mu.mu_gt2 * gstar;
  return b;
}

/// Binds a model, its weights and target into a reusable (n, seed) -> batch
/// sampler.
struct ModelSampler {
  ModelTag tag = ModelTag::RF;
  const WeightEnsemble* weights = nullptr;
  const TargetSpec* target = nullptr;
  ActivationSpec sigma;
  HermiteCoeffs mu;

  SampleBatch operator()(Eigen::Index n, std::uint64_t seed) const {
    if (!weights || !target) throw precondition_error("ModelSampler: unbound weights or target");
    switch (tag) {
      case ModelTag::RF: return rf_batch(*weights, *target, sigma, n, seed);
      case ModelTag::GE: return ge_batch_quadratic(*weights, *target, mu, n, seed);
      case ModelTag::PGE: return pge_batch(*weights, *target, mu, n, seed);
      case ModelTag::CGE: return cge_batch(*weights, *target, mu, n, seed);
    }
    throw precondition_error("ModelSampler: unknown tag");
  }
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// CSV layout:
///   model_tag,d,p,n,m,seed
///   <values>
///   Z            then p rows of n values
///   F            then m rows of n values
///   y            then one row of n values
inline void write_csv(std::ostream& os, const SampleBatch& b) {
  os << "model_tag,d,p,n,m,seed\n"
     << to_string(b.model_tag) << ',' << b.d << ',' << b.p() << ',' << b.n() << ',' << b.m() << ',' << b.seed << '\n';
  os << std::setprecision(17);
  auto rows = [&](const char* name, const auto& mat) {
    os << name << '\n';
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      for (Eigen::Index j = 0; j < mat.cols(); ++j) os << (j ? "," : "") << mat(i, j);
      os << '\n';
    }
  };
  rows("Z", b.Z);
  rows("F", b.F);
  rows("y", b.y.transpose());
}

inline SampleBatch read_csv(std::istream& is) {
  std::string line;
  auto next = [&]() {
    if (!std::getline(is, line)) throw precondition_error("read_csv: truncated batch");
    return line;
  };
  if (next() != "model_tag,d,p,n,m,seed") throw precondition_error("read_csv: bad header");
  std::stringstream hdr(next());
  std::string tag, field;
  std::getline(hdr, tag, ',');
  std::vector<std::uint64_t> v;
  while (std::getline(hdr, field, ',')) v.push_back(std::stoull(field));
  if (v.size() != 5) throw precondition_error("read_csv: bad header values");
  SampleBatch b;
  b.model_tag = parse_model_tag(tag);
  b.d = static_cast<int>(v[0]);
  const auto p = static_cast<Eigen::Index>(v[1]), n = static_cast<Eigen::Index>(v[2]),
             m = static_cast<Eigen::Index>(v[3]);
  b.seed = v[4];
  auto block = [&](const char* name, Eigen::Index rows) {
    if (next() != name) throw precondition_error(std::string("read_csv: expected section ") + name);
    Eigen::MatrixXd mat(rows, n);
    for (Eigen::Index i = 0; i < rows; ++i) {
      std::stringstream ss(next());
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!std::getline(ss, field, ',')) throw precondition_error("read_csv: short row");
        mat(i, j) = std::stod(field);
      }
    }
    return mat;
  };
  b.Z = block("Z", p);
  b.F = block("F", m);
  b.y = block("y", 1).row(0).transpose();
  return b;
}

/// Binary layout (little-endian host order): 8-byte magic "CLBATCH1",
/// u32 model tag, u32 d, u64 p, n, m, seed, then Z, F, y as row-major doubles.
inline void write_binary(std::ostream& os, const SampleBatch& b) {
  os.write("CLBATCH1", 8);
  const auto tag = static_cast<std::uint32_t>(b.model_tag);
  const auto d = static_cast<std::uint32_t>(b.d);
  const std::uint64_t dims[4] = {static_cast<std::uint64_t>(b.p()), static_cast<std::uint64_t>(b.n()),
                                 static_cast<std::uint64_t>(b.m()), b.seed};
  os.write(reinterpret_cast<const char*>(&tag), sizeof tag);
  os.write(reinterpret_cast<const char*>(&d), sizeof d);
  os.write(reinterpret_cast<const char*>(dims), sizeof dims);
  auto put = [&](const Eigen::MatrixXd& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    os.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  };
  put(b.Z);
  put(b.F);
  put(b.y.transpose());
}

inline SampleBatch read_binary(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != "CLBATCH1") throw precondition_error("read_binary: bad magic");
  std::uint32_t tag = 0, d = 0;
  std::uint64_t dims[4];
  is.read(reinterpret_cast<char*>(&tag), sizeof tag);
  is.read(reinterpret_cast<char*>(&d), sizeof d);
  is.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!is || tag > 3) throw precondition_error("read_binary: bad header");
  SampleBatch b;
  b.model_tag = static_cast<ModelTag>(tag);
  b.d = static_cast<int>(d);
  b.seed = dims[3];
  const auto p = static_cast<Eigen::Index>(dims[0]), n = static_cast<Eigen::Index>(dims[1]),
             m = static_cast<Eigen::Index>(dims[2]);
  auto get = [&](Eigen::Index rows) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, n);
    is.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!is) throw precondition_error("read_binary: truncated payload");
    return Eigen::MatrixXd(rm);
  };
  b.Z = get(p);
  b.F = get(m);
  b.y = get(1).row(0).transpose();
  return b;
}

}  // namespace chaoslab
