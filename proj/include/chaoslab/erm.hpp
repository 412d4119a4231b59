#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaoslab/error.hpp"
#include "chaoslab/models.hpp"
#include "chaoslab/stats.hpp"

namespace chaoslab {

/// Loss l(y, yhat). Squared is 1/2 (y - yhat)^2; hinge is the Huberized
/// hinge, quadratic for margins in [1 - delta, 1 + delta].
struct LossSpec {
  enum class Kind { squared, logistic, hinge, zero_one };
  Kind kind = Kind::squared;
  double delta = 0.1;

  static LossSpec squared() { return {Kind::squared}; }
  static LossSpec logistic() { return {Kind::logistic}; }
  static LossSpec hinge(double delta = 0.1) {
    if (!(delta > 0.0 && delta < 1.0)) throw precondition_error("hinge: smoothing delta must lie in (0, 1)");
    return {Kind::hinge, delta};
  }
  static LossSpec zero_one() { return {Kind::zero_one}; }

  static LossSpec parse(const std::string& name, double delta = 0.1) {
    if (name == "squared" || name == "quadratic") return squared();
    if (name == "logistic") return logistic();
    if (name == "hinge") return hinge(delta);
    if (name == "zero_one" || name == "zero-one" || name == "01") return zero_one();
    throw loss_error("unknown loss: " + name);
  }

  std::string name() const {
    switch (kind) {
      case Kind::squared: return "squared";
      case Kind::logistic: return "logistic";
      case Kind::hinge: return "hinge";
      case Kind::zero_one: return "zero_one";
    }
    return "?";
  }

  bool trainable() const { return kind != Kind::zero_one; }
  void require_trainable() const {
    if (!trainable()) throw loss_error("loss '" + name() + "' is for evaluation only");
  }

  double value(double y, double yh) const {
    switch (kind) {
      case Kind::squared: return 0.5 * (y - yh) * (y - yh);
      case Kind::logistic: {
        const double m = y * yh;
        return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
      }
      case Kind::hinge: {
        const double m = y * yh;
        if (m <= 1.0 - delta) return 1.0 - m;
        if (m >= 1.0 + delta) return 0.0;
        return (1.0 + delta - m) * (1.0 + delta - m) / (4.0 * delta);
      }
      case Kind::zero_one: return (yh >= 0.0 ? 1.0 : -1.0) == y ? 0.0 : 1.0;
    }
    return 0.0;
  }

  /// d l / d yhat
  double d1(double y, double yh) const {
    switch (kind) {
      case Kind::squared: return yh - y;
      case Kind::logistic: return -y * sigmoid(-y * yh);
      case Kind::hinge: {
        const double m = y * yh;
        if (m <= 1.0 - delta) return -y;
        if (m >= 1.0 + delta) return 0.0;
        return -y * (1.0 + delta - m) / (2.0 * delta);
      }
      case Kind::zero_one: break;
    }
    throw loss_error("zero-one loss has no derivative");
  }

  /// d^2 l / d yhat^2 (one-sided inside the hinge band edges)
  double d2(double y, double yh) const {
    switch (kind) {
      case Kind::squared: return 1.0;
      case Kind::logistic: {
        const double s = sigmoid(y * yh);
        return y * y * s * (1.0 - s);
      }
      case Kind::hinge: {
        const double m = y * yh;
        return (m > 1.0 - delta && m < 1.0 + delta) ? y * y / (2.0 * delta) : 0.0;
      }
      case Kind::zero_one: break;
    }
    throw loss_error("zero-one loss has no derivative");
  }

  /// Upper bound on d2 for labels in [-1, 1].
  double curvature_bound() const {
    switch (kind) {
      case Kind::squared: return 1.0;
      case Kind::logistic: return 0.25;
      case Kind::hinge: return 1.0 / (2.0 * delta);
      case Kind::zero_one: break;
    }
    throw loss_error("zero-one loss has no curvature");
  }

  static double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }
};

// ---------------------------------------------------------------------------
// Moreau envelope and proximal operator
// ---------------------------------------------------------------------------

/// argmin_x l(y, x) + (x - z)^2 / (2 gamma), by safeguarded Newton on the
/// first-order condition with a bisection fallback.
inline double prox(double y, double z, double gamma, const LossSpec& loss) {
  loss.require_trainable();
  if (!(gamma > 0.0)) throw precondition_error("prox: gamma must be positive");
  if (loss.kind == LossSpec::Kind::squared) return (z + gamma * y) / (1.0 + gamma);
  auto foc = [&](double x) { return loss.d1(y, x) + (x - z) / gamma; };
  // l' is monotone, so the root lies between z and z - gamma * l'(y, z).
  double lo = z, hi = z - gamma * loss.d1(y, z);
  if (lo > hi) std::swap(lo, hi);
  if (lo == hi) return z;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = foc(x);
    if (std::abs(f) <= 1e-13) return x;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double slope = loss.d2(y, x) + 1.0 / gamma;
    double next = x - f / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

/// min_x l(y, x) + (x - z)^2 / (2 gamma), centered by -l(0, 0).
inline double moreau(double y, double z, double gamma, const LossSpec& loss) {
  const double x = prox(y, z, gamma, loss);
  return loss.value(y, x) + (x - z) * (x - z) / (2.0 * gamma) - loss.value(0.0, 0.0);
}

// ---------------------------------------------------------------------------
// Ridge ERM
// ---------------------------------------------------------------------------

struct FitOptions {
  enum class Method { accelerated, newton };
  double tol = 1e-8;
  int max_iter = 20000;
  Method method = Method::accelerated;
  bool record_history = false;

  static Method parse_method(const std::string& s) {
    if (s == "accelerated" || s == "fista") return Method::accelerated;
    if (s == "newton") return Method::newton;
    throw precondition_error("unknown solver: " + s);
  }
};

struct FitResult {
  Eigen::VectorXd theta;
  double risk = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective per accepted iterate, if requested
};

inline nlohmann::json fit_json(const FitResult& r, Eigen::Index theta_limit = 256) {
  nlohmann::json j{{"risk", r.risk}, {"grad_norm", r.grad_norm}, {"iterations", r.iterations},
                   {"converged", r.converged}};
  if (r.theta.size() <= theta_limit) j["theta"] = std::vector<double>(r.theta.data(), r.theta.data() + r.theta.size());
  return j;
}

inline constexpr double kLambdaFloor = 1e-6;

namespace detail {

// Objective (1/n) sum l(y_i, m_i) + lambda/2 |theta|^2 from margins m = Z^T theta.
inline double objective(const LossSpec& loss, const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                        const Eigen::VectorXd& theta, double lambda) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) acc += loss.value(y[i], m[i]);
  return (y.size() ? acc / static_cast<double>(y.size()) : 0.0) + 0.5 * lambda * theta.squaredNorm();
}

inline Eigen::VectorXd gradient(const Eigen::MatrixXd& z, const LossSpec& loss, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& m, const Eigen::VectorXd& theta, double lambda) {
  Eigen::VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) r[i] = loss.d1(y[i], m[i]);
  Eigen::VectorXd g = lambda * theta;
  if (y.size()) g.noalias() += z * r / static_cast<double>(y.size());
  return g;
}

// Largest eigenvalue of Z Z^T / n by power iteration.
inline double gram_op_norm(const Eigen::MatrixXd& z, int iters = 30) {
  if (z.size() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(z.rows()).normalized();
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd w = z * (z.transpose() * v);
    est = w.norm();
    if (est == 0.0) return 0.0;
    v = w / est;
  }
  return est / static_cast<double>(z.cols());
}

using IterateHook = std::function<bool(const Eigen::VectorXd& theta, const Eigen::VectorXd& margins, double obj,
                                       double grad_norm)>;

inline FitResult accelerated(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const LossSpec& loss, double lambda,
                             const FitOptions& opt, double initial_step = 0.0, const IterateHook& hook = {}) {
  const Eigen::Index p = z.rows();
  FitResult res;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p), prev = theta;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(y.size()), m_prev = m;
  double f = objective(loss, y, m, theta, lambda);
  double step = initial_step > 0.0 ? initial_step : 1.0 / (lambda + loss.curvature_bound() * gram_op_norm(z));
  double t = 1.0;
  Eigen::VectorXd g = gradient(z, loss, y, m, theta, lambda);
  res.grad_norm = g.norm();
  if (opt.record_history) res.history.push_back(f);
  if (hook && hook(theta, m, f, res.grad_norm)) {
    res.theta = theta, res.risk = f;
    return res;
  }
  if (res.grad_norm <= opt.tol) {
    res.theta = theta, res.risk = f, res.converged = true;
    return res;
  }
  const bool grow = initial_step > 0.0;
  const double slack = 8.0 * std::numeric_limits<double>::epsilon();  // allow the step to expand (flattening losses)
  for (int it = 1; it <= opt.max_iter; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    Eigen::VectorXd yv = theta + beta * (theta - prev);
    Eigen::VectorXd my = m + beta * (m - m_prev);
    double fy = objective(loss, y, my, yv, lambda);
    Eigen::VectorXd gy = gradient(z, loss, y, my, yv, lambda);
    Eigen::VectorXd zg = z.transpose() * gy;
    if (grow) step *= 2.0;
    Eigen::VectorXd x, mx;
    double fx = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      x = yv - step * gy;
      mx = my - step * zg;
      fx = objective(loss, y, mx, x, lambda);
      if (fx <= fy - 0.5 * step * gy.squaredNorm() + slack * std::abs(fy)) break;
      step *= 0.5;
    }
    if (fx > f + slack * std::abs(f)) {
      // objective went up: drop the momentum and retry from the current iterate
      t = 1.0;
      prev = theta;
      m_prev = m;
      --it;
      if (beta == 0.0) break;  // even a plain gradient step fails: numerical floor
      continue;
    }
    // gradient restart when the momentum points uphill
    const bool restart = gy.dot(x - theta) > 0.0;
    prev.swap(theta);
    m_prev.swap(m);
    theta = std::move(x);
    m = std::move(mx);
    t = restart ? 1.0 : t_next;
    if (it % 100 == 0) m.noalias() = z.transpose() * theta;  // refresh recurrence drift
    f = objective(loss, y, m, theta, lambda);
    g = gradient(z, loss, y, m, theta, lambda);
    res.grad_norm = g.norm();
    res.iterations = it;
    if (opt.record_history) res.history.push_back(f);
    if (hook && hook(theta, m, f, res.grad_norm)) break;
    if (res.grad_norm <= opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.theta = std::move(theta);
  m.noalias() = z.transpose() * res.theta;
  res.risk = objective(loss, y, m, res.theta, lambda);
  res.grad_norm = gradient(z, loss, y, m, res.theta, lambda).norm();
  res.converged = res.converged || res.grad_norm <= opt.tol;
  return res;
}

// Damped Newton with Armijo backtracking. The Newton system uses the p x p
// Hessian when p <= |active|, and the Woodbury identity through the kernel
// Z^T Z otherwise.
inline FitResult newton(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const LossSpec& loss, double lambda,
                        const FitOptions& opt, const IterateHook& hook = {}) {
  const Eigen::Index p = z.rows(), n = z.cols();
  const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
  FitResult res;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  double f = objective(loss, y, m, theta, lambda);
  Eigen::MatrixXd kernel;  // Z^T Z, built on first use
  const double slack = 8.0 * std::numeric_limits<double>::epsilon();
  std::vector<Eigen::Index> active;
  active.reserve(static_cast<std::size_t>(n));
  if (opt.record_history) res.history.push_back(f);
  for (int it = 0;; ++it) {
    Eigen::VectorXd g = gradient(z, loss, y, m, theta, lambda);
    res.grad_norm = g.norm();
    res.iterations = it;
    if (hook && hook(theta, m, f, res.grad_norm)) break;
    if (res.grad_norm <= opt.tol) {
      res.converged = true;
      break;
    }
    if (it >= opt.max_iter) break;
    active.clear();
    Eigen::VectorXd curv(n);
    double cmax = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) cmax = std::max(cmax, curv[i] = loss.d2(y[i], m[i]) * inv_n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (curv[i] > 1e-14 * cmax && curv[i] > 0.0) active.push_back(i);
    const auto a = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd dir;
    if (p <= a || a == 0) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Identity(p, p) * lambda;
      if (a > 0) {
        Eigen::MatrixXd za(p, a);
        for (Eigen::Index c = 0; c < a; ++c) za.col(c) = z.col(active[c]) * std::sqrt(curv[active[c]]);
        h.selfadjointView<Eigen::Lower>().rankUpdate(za);
      }
      dir = -h.selfadjointView<Eigen::Lower>().llt().solve(g);
    } else {
      if (kernel.size() == 0) {
        kernel.resize(n, n);
        kernel.setZero();
        kernel.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
        kernel.triangularView<Eigen::StrictlyUpper>() = kernel.transpose();
      }
      Eigen::MatrixXd mat(a, a);
      Eigen::VectorXd r(a);
      const Eigen::VectorXd zg = z.transpose() * g;
      for (Eigen::Index c = 0; c < a; ++c) {
        for (Eigen::Index b = 0; b < a; ++b) mat(b, c) = kernel(active[b], active[c]) / lambda;
        mat(c, c) += 1.0 / curv[active[c]];
        r[c] = zg[active[c]];
      }
      const Eigen::VectorXd s = mat.llt().solve(r);
      Eigen::VectorXd us = Eigen::VectorXd::Zero(n);
      for (Eigen::Index c = 0; c < a; ++c) us[active[c]] = s[c];
      dir = -(g - z * us / lambda) / lambda;
    }
    const Eigen::VectorXd zd = z.transpose() * dir;
    const double slope = g.dot(dir);
    if (!(slope < 0.0)) break;  // no descent direction left at working precision
    double step = 1.0, fx = f;
    Eigen::VectorXd x, mx;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      x = theta + step * dir;
      mx = m + step * zd;
      fx = objective(loss, y, mx, x, lambda);
      if (fx <= f + 1e-4 * step * slope + slack * std::abs(f)) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    theta = std::move(x);
    m = std::move(mx);
    f = fx;
    if (opt.record_history) res.history.push_back(f);
  }
  res.theta = std::move(theta);
  m.noalias() = z.transpose() * res.theta;
  res.risk = objective(loss, y, m, res.theta, lambda);
  res.grad_norm = gradient(z, loss, y, m, res.theta, lambda).norm();
  res.converged = res.converged || res.grad_norm <= opt.tol;
  return res;
}

}  // namespace detail

/// Minimizes (1/n) sum l(y_i, <theta, z_i>) + (lambda/2) |theta|^2 from a
/// cold start at 0. Z is p x n with one sample per column.
inline FitResult fit_ridge_erm(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const LossSpec& loss, double lambda,
                               const FitOptions& opt = {}) {
  loss.require_trainable();
  if (!(lambda >= kLambdaFloor)) throw precondition_error("fit_ridge_erm: lambda must be at least 1e-6");
  if (z.cols() != y.size()) throw precondition_error("fit_ridge_erm: Z and y disagree on n");
  if (opt.method == FitOptions::Method::newton) return detail::newton(z, y, loss, lambda, opt);
  return detail::accelerated(z, y, loss, lambda, opt);
}

inline FitResult fit_ridge_erm(const SampleBatch& b, const LossSpec& loss, double lambda, const FitOptions& opt = {}) {
  return fit_ridge_erm(b.Z, b.y, loss, lambda, opt);
}

/// Closed-form ridge for the squared loss: ((1/n) Z Z^T + lambda I)^{-1} (1/n) Z y.
inline Eigen::VectorXd ridge_closed_form(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double lambda) {
  const double n = static_cast<double>(z.cols());
  Eigen::MatrixXd a = z * z.transpose() / n;
  a.diagonal().array() += lambda;
  return a.ldlt().solve(z * y / n);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Per-sample losses of predictions <theta, z_i>; zero-one classifies by sign.
inline Eigen::VectorXd sample_losses(const Eigen::VectorXd& theta, const SampleBatch& b, const LossSpec& loss) {
  const Eigen::VectorXd pred = b.Z.transpose() * theta;
  Eigen::VectorXd out(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) out[i] = loss.value(b.y[i], pred[i]);
  return out;
}

/// Monte Carlo estimate of E[l(y, <theta, z>) | W] on fresh draws from
/// `sampler`, in chunks so that memory stays bounded.
inline stats::Estimate test_error(const Eigen::VectorXd& theta, const ModelSampler& sampler, const LossSpec& loss,
                                  Eigen::Index n_test, std::uint64_t seed, Eigen::Index chunk = 4096) {
  if (n_test < 100) throw capacity_error("test_error: n_test must be at least 100");
  Eigen::VectorXd all(n_test);
  Eigen::Index done = 0;
  for (std::uint64_t c = 0; done < n_test; ++c) {
    const Eigen::Index len = std::min(chunk, n_test - done);
    const auto b = sampler(len, derive_seed(seed, "test_chunk", c));
    all.segment(done, len) = sample_losses(theta, b, loss);
    done += len;
  }
  return stats::mean_se(all);
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

struct InterpolationOptions {
  int max_iter = 50000;
  FitOptions::Method method = FitOptions::Method::accelerated;
  double stationary_rtol = 1e-6;  // relative to the gradient norm at 0
};

/// True iff unregularized logistic descent reaches y_i <theta, z_i> > 0 for
/// every i. A (relative) stationary point with positive loss certifies
/// non-separability; exhausting max_iter also reports false.
inline bool interpolation_check(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                const InterpolationOptions& io = {}) {
  if (z.cols() != y.size()) throw precondition_error("interpolation_check: Z and y disagree on n");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 1.0 && y[i] != -1.0) throw label_error("interpolation_check: labels must be +-1");
  if (y.size() == 0) return true;
  bool separated = false;
  auto hook = [&](const Eigen::VectorXd&, const Eigen::VectorXd& m, double, double) {
    separated = (y.array() * m.array() > 0.0).all();
    return separated;
  };
  const double g0 = (z * y).norm() / (2.0 * static_cast<double>(y.size()));
  if (g0 == 0.0) return false;  // theta = 0 is already stationary
  FitOptions opt;
  opt.tol = io.stationary_rtol * g0;
  opt.max_iter = io.max_iter;
  const auto loss = LossSpec::logistic();
  if (io.method == FitOptions::Method::newton) {
    // a vanishing ridge keeps the Newton system nonsingular when p > n
    detail::newton(z, y, loss, 1e-12, opt, hook);
  } else {
    const double l = loss.curvature_bound() * detail::gram_op_norm(z);
    detail::accelerated(z, y, loss, 0.0, opt, l > 0.0 ? 1.0 / l : 1.0, hook);
  }
  return separated;
}

inline bool interpolation_check(const SampleBatch& b, const InterpolationOptions& io = {}) {
  return interpolation_check(b.Z, b.y, io);
}

}  // namespace chaoslab
