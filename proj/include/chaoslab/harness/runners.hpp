#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaoslab/erm.hpp"
#include "chaoslab/genericity.hpp"
#include "chaoslab/harness/config.hpp"
#include "chaoslab/harness/parallel.hpp"
#include "chaoslab/harness/results.hpp"
#include "chaoslab/harness/selftest.hpp"
#include "chaoslab/models.hpp"
#include "chaoslab/spectra.hpp"
#include "chaoslab/stats.hpp"

namespace chaoslab::harness {

struct RunOutput {
  ResultTable table;
  json diagnostics;
  bool selftest_failed = false;
};

struct SolverStats {
  int fits = 0;
  int unconverged = 0;
  long iterations = 0;
  double max_grad_norm = 0.0;

  void add(const FitResult& r) {
    ++fits;
    if (!r.converged) ++unconverged;
    iterations += r.iterations;
    max_grad_norm = std::max(max_grad_norm, r.grad_norm);
  }
  void merge(const SolverStats& o) {
    fits += o.fits;
    unconverged += o.unconverged;
    iterations += o.iterations;
    max_grad_norm = std::max(max_grad_norm, o.max_grad_norm);
  }
  json to_json() const {
    return {{"fits", fits},
            {"unconverged", unconverged},
            {"mean_iterations", fits ? static_cast<double>(iterations) / fits : 0.0},
            {"max_grad_norm", max_grad_norm}};
  }
};

namespace detail {

/// Settings every experiment reads the same way.
struct Common {
  int d = 0;
  int trials = 1;
  int threads = 1;
  std::uint64_t master = 1;
  double lambda = 1e-3;
  Eigen::Index n_test = 10000;
  ActivationSpec sigma;
  HermiteCoeffs mu;
  FitOptions solver;

  explicit Common(const json& cfg) {
    validate_common(cfg);
    d = get<int>(cfg, "d");
    trials = get<int>(cfg, "trials");
    threads = get<int>(cfg, "threads");
    master = get<std::uint64_t>(cfg, "master_seed");
    lambda = get<double>(cfg, "lambda");
    n_test = get<Eigen::Index>(cfg, "n_test");
    if (n_test < 100) throw config_error("config: n_test must be at least 100");
    sigma = activation_from(cfg.at("activation"));
    solver = solver_from(cfg);
    try {
      mu = coeffs_from(cfg, sigma);
    } catch (const chaoslab::error& e) {
      throw config_error(std::string("config: activation: ") + e.what());
    }
  }

  std::uint64_t trial_seed(int t) const { return derive_seed(master, "trial", static_cast<std::uint64_t>(t)); }

  json hermite_json() const {
    return {{"activation", sigma.name()},
            {"mu", std::vector<double>(mu.mu.data(), mu.mu.data() + mu.mu.size())},
            {"mu_gt2", mu.mu_gt2}};
  }
};

inline Eigen::Index scaled(double ratio, double base) {
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(ratio * base)));
}

inline bool classification_loss(const LossSpec& l) { return l.kind != LossSpec::Kind::squared; }

/// Mean losses of several predictors on one shared stream of fresh draws,
/// chunked like test_error so that a single pair reproduces it exactly.
inline std::vector<double> shared_test_losses(const ModelSampler& sampler,
                                              const std::vector<std::pair<const Eigen::VectorXd*, LossSpec>>& evals,
                                              Eigen::Index n_test, std::uint64_t seed, Eigen::Index chunk = 4096) {
  std::vector<double> sums(evals.size(), 0.0);
  Eigen::Index done = 0;
  for (std::uint64_t c = 0; done < n_test; ++c) {
    const Eigen::Index len = std::min(chunk, n_test - done);
    const auto b = sampler(len, derive_seed(seed, "test_chunk", c));
    for (std::size_t e = 0; e < evals.size(); ++e) sums[e] += sample_losses(*evals[e].first, b, evals[e].second).sum();
    done += len;
  }
  for (auto& s : sums) s /= static_cast<double>(n_test);
  return sums;
}

inline double mean_train_loss(const Eigen::VectorXd& theta, const SampleBatch& b, const LossSpec& loss) {
  return b.n() ? sample_losses(theta, b, loss).mean() : 0.0;
}

/// Genericity of every higher chaos coordinate of `t`.
inline json target_genericity(const TargetSpec& t, std::uint64_t seed, std::int64_t n_mc = 10000) {
  json j = json::array();
  for (std::size_t i = 0; i < t.higher.size(); ++i) j.push_back(genericity_report(t.higher[i], n_mc, derive_seed(seed, "genericity", i)));
  return j;
}

using TrialValues = std::map<std::string, double>;

struct TrialOut {
  TrialValues values;
  SolverStats stats;
  json diag;
};

inline std::vector<double> column(const std::vector<TrialOut>& trials, const std::string& key) {
  std::vector<double> v;
  v.reserve(trials.size());
  for (const auto& t : trials) v.push_back(t.values.at(key));
  return v;
}

inline SolverStats merged_stats(const std::vector<TrialOut>& trials) {
  SolverStats s;
  for (const auto& t : trials) s.merge(t.stats);
  return s;
}

inline std::string key(std::initializer_list<std::string> parts) {
  std::string k;
  for (const auto& p : parts) k += (k.empty() ? "" : "/") + p;
  return k;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// lossgrid: test errors over a p/n grid for each (train, test) loss cell
// ---------------------------------------------------------------------------

inline RunOutput run_lossgrid(const json& cfg) {
  using namespace detail;
  const Common c(cfg);
  const double n_ratio = positive(cfg, "n_ratio");
  const auto p_ratios = positive_grid(cfg, "p_ratios");
  const auto models = models_from(cfg);
  const auto responses = get<std::vector<std::string>>(cfg, "responses");
  if (responses.empty()) throw config_error("config: 'responses' must be nonempty");
  for (const auto& r : responses)
    if (!cfg.at("targets").contains(r)) throw config_error("config: no target named '" + r + "'");

  struct Cell {
    std::string train, test;
    LossSpec train_loss, test_loss;
    bool classification;
  };
  std::vector<Cell> cells;
  for (const auto& cell : cfg.at("cells")) {
    Cell x{get<std::string>(cell, "train"), get<std::string>(cell, "test"), {}, {}, false};
    x.train_loss = loss_from(cfg, x.train);
    x.test_loss = loss_from(cfg, x.test);
    if (!x.train_loss.trainable()) throw config_error("config: '" + x.train + "' cannot be used for training");
    x.classification = classification_loss(x.train_loss) || classification_loss(x.test_loss);
    cells.push_back(x);
  }
  if (cells.empty()) throw config_error("config: 'cells' must be nonempty");
  // validate targets once up front
  for (const auto& r : responses) (void)target_from(cfg.at("targets").at(r), c.d, 1, false);

  const double d2 = static_cast<double>(c.d) * c.d;
  const Eigen::Index n = scaled(n_ratio, d2);
  auto train_metric = [](bool cls) { return std::string(cls ? "train_loss_sign" : "train_loss"); };

  auto trial = [&](int t) {
    TrialOut out;
    const std::uint64_t ts = c.trial_seed(t);
    for (const auto& r : responses) {
      const std::uint64_t target_seed = derive_seed(ts, "target:" + r);
      for (std::size_t pi = 0; pi < p_ratios.size(); ++pi) {
        const Eigen::Index p = scaled(p_ratios[pi], static_cast<double>(n));
        const auto we = sample_weights(c.d, static_cast<int>(p), derive_seed(ts, "weights", pi));
        for (bool cls : {false, true}) {
          std::vector<const Cell*> active;
          for (const auto& cell : cells)
            if (cell.classification == cls) active.push_back(&cell);
          if (active.empty()) continue;
          const TargetSpec target = target_from(cfg.at("targets").at(r), c.d, target_seed, cls);
          if (t == 0 && pi == 0) out.diag["genericity"][r] = target_genericity(target, target_seed);
          for (auto tag : models) {
            const ModelSampler sampler{tag, &we, &target, c.sigma, c.mu};
            const auto batch = sampler(n, derive_seed(ts, "train", pi));
            std::map<std::string, Eigen::VectorXd> thetas;
            for (const auto* cell : active) {
              if (thetas.count(cell->train)) continue;
              const auto fit = fit_ridge_erm(batch, cell->train_loss, c.lambda, c.solver);
              out.stats.add(fit);
              thetas[cell->train] = fit.theta;
              out.values[key({r, cell->train, train_metric(cls), to_string(tag), std::to_string(pi)})] =
                  mean_train_loss(fit.theta, batch, cell->train_loss);
            }
            std::vector<std::pair<const Eigen::VectorXd*, LossSpec>> evals;
            for (const auto* cell : active) evals.emplace_back(&thetas.at(cell->train), cell->test_loss);
            const auto losses = shared_test_losses(sampler, evals, c.n_test, derive_seed(ts, "test", pi));
            for (std::size_t e = 0; e < active.size(); ++e)
              out.values[key({r, active[e]->train, active[e]->test, to_string(tag), std::to_string(pi)})] = losses[e];
          }
        }
      }
    }
    return out;
  };
  const auto trials = run_indexed<TrialOut>(c.trials, c.threads, trial);

  RunOutput ro{ResultTable("lossgrid"), {}, false};
  for (const auto& r : responses)
    for (const auto& cell : cells)
      for (auto tag : models)
        for (std::size_t pi = 0; pi < p_ratios.size(); ++pi) {
          const Coords coords{{"p_over_n", p_ratios[pi]}, {"n_over_d2", n_ratio}};
          ro.table.add(to_string(tag), coords, key({r, cell.train, cell.test}),
                       column(trials, key({r, cell.train, cell.test, to_string(tag), std::to_string(pi)})));
        }
  // one train-loss row set per distinct (train loss, label kind)
  for (const auto& r : responses)
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      bool seen = false;
      for (std::size_t prev = 0; prev < ci; ++prev)
        seen = seen || (cells[prev].train == cells[ci].train && cells[prev].classification == cells[ci].classification);
      if (seen) continue;
      const std::string metric = train_metric(cells[ci].classification);
      for (auto tag : models)
        for (std::size_t pi = 0; pi < p_ratios.size(); ++pi)
          ro.table.add(to_string(tag), {{"p_over_n", p_ratios[pi]}, {"n_over_d2", n_ratio}},
                       key({r, cells[ci].train, metric}),
                       column(trials, key({r, cells[ci].train, metric, to_string(tag), std::to_string(pi)})));
    }
  ro.diagnostics = {{"solver", merged_stats(trials).to_json()},
                    {"hermite", c.hermite_json()},
                    {"n", n},
                    {"target_genericity", trials.front().diag.value("genericity", json::object())}};
  return ro;
}

// ---------------------------------------------------------------------------
// marginal: law of <theta, z> on fresh RF / GE / CGE draws
// ---------------------------------------------------------------------------

inline RunOutput run_marginal(const json& cfg) {
  using namespace detail;
  const Common c(cfg);
  const double n_ratio = positive(cfg, "n_ratio");
  const double p_ratio = positive(cfg, "p_ratio");
  const auto models = models_from(cfg);
  const auto train_loss = loss_from(cfg, get<std::string>(cfg, "train_loss"));
  if (train_loss.kind != LossSpec::Kind::squared) throw config_error("config: marginal requires the squared training loss");
  const int bins = get<int>(cfg, "bins");
  if (bins < 1) throw config_error("config: bins must be >= 1");
  (void)target_from(cfg.at("target"), c.d, 1, false);

  const double d2 = static_cast<double>(c.d) * c.d;
  const Eigen::Index n = scaled(n_ratio, d2);
  const Eigen::Index p = scaled(p_ratio, d2);

  auto trial = [&](int t) {
    TrialOut out;
    const std::uint64_t ts = c.trial_seed(t);
    const auto we = sample_weights(c.d, static_cast<int>(p), derive_seed(ts, "weights"));
    const TargetSpec target = target_from(cfg.at("target"), c.d, derive_seed(ts, "target"), false);
    if (t == 0) out.diag["genericity"] = target_genericity(target, derive_seed(ts, "target"));
    const ModelSampler rf{ModelTag::RF, &we, &target, c.sigma, c.mu};
    const auto fit = fit_ridge_erm(rf(n, derive_seed(ts, "train")), train_loss, c.lambda, c.solver);
    out.stats.add(fit);

    std::vector<std::vector<double>> preds;
    for (auto tag : models) {
      const ModelSampler s{tag, &we, &target, c.sigma, c.mu};
      std::vector<double> v;
      v.reserve(static_cast<std::size_t>(c.n_test));
      Eigen::Index done = 0;
      for (std::uint64_t ch = 0; done < c.n_test; ++ch) {
        const Eigen::Index len = std::min<Eigen::Index>(4096, c.n_test - done);
        const Eigen::VectorXd pr = s(len, derive_seed(derive_seed(ts, "test"), "test_chunk", ch)).Z.transpose() * fit.theta;
        v.insert(v.end(), pr.data(), pr.data() + pr.size());
        done += len;
      }
      const std::string m = to_string(tag);
      const auto e = stats::mean_se(std::span<const double>(v));
      out.values[key({m, "mean"})] = e.value;
      out.values[key({m, "sd"})] = std::sqrt(stats::central_moment(v, e.value, 2));
      out.values[key({m, "skewness"})] = stats::skewness(v);
      out.values[key({m, "excess_kurtosis"})] = stats::excess_kurtosis(v);
      preds.push_back(std::move(v));
    }
    // histogram window: reference (first) model's mean +- 6 sd
    const double center = out.values.at(key({to_string(models[0]), "mean"}));
    const double sd = out.values.at(key({to_string(models[0]), "sd"}));
    const double lo = center - 6.0 * sd, hi = center + 6.0 * sd;
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto h = stats::histogram(preds[m], lo, hi, bins);
      const double width = (hi - lo) / bins;
      for (int b = 0; b < bins; ++b)
        out.values[key({to_string(models[m]), "density", std::to_string(b)})] =
            width > 0.0 ? h[static_cast<std::size_t>(b)] / (static_cast<double>(preds[m].size()) * width) : 0.0;
    }
    for (std::size_t a = 0; a < models.size(); ++a)
      for (std::size_t b = a + 1; b < models.size(); ++b)
        out.values[key({"ks", to_string(models[a]), to_string(models[b])})] = stats::ks_distance(preds[a], preds[b]);
    return out;
  };
  const auto trials = run_indexed<TrialOut>(c.trials, c.threads, trial);

  RunOutput ro{ResultTable("marginal"), {}, false};
  const Coords base{{"n_over_d2", n_ratio}, {"p_over_d2", p_ratio}};
  for (auto tag : models)
    for (const char* m : {"mean", "sd", "skewness", "excess_kurtosis"})
      ro.table.add(to_string(tag), base, m, column(trials, key({to_string(tag), m})));
  for (std::size_t a = 0; a < models.size(); ++a)
    for (std::size_t b = a + 1; b < models.size(); ++b)
      ro.table.add(std::string(to_string(models[a])) + "|" + to_string(models[b]), base, "ks",
                   column(trials, key({"ks", to_string(models[a]), to_string(models[b])})));
  for (auto tag : models)
    for (int b = 0; b < bins; ++b) {
      Coords coords = base;
      coords.emplace_back("z_std", -6.0 + (b + 0.5) * 12.0 / bins);
      ro.table.add(to_string(tag), coords, "density", column(trials, key({to_string(tag), "density", std::to_string(b)})));
    }
  ro.diagnostics = {{"solver", merged_stats(trials).to_json()},
                    {"hermite", c.hermite_json()},
                    {"n", n},
                    {"p", p},
                    {"target_genericity", trials.front().diag.value("genericity", json::array())}};
  return ro;
}

// ---------------------------------------------------------------------------
// boundary: P(sign <theta, phi(x)> = +1) over a 2D slice
// ---------------------------------------------------------------------------

namespace detail {

/// First crossing of 0.5 when walking outward from t = 0 along one side;
/// linear interpolation between grid points, NaN if none.
inline double crossing(const std::vector<double>& t, const std::vector<double>& prob, bool positive_side) {
  std::vector<std::pair<double, double>> side;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (positive_side ? t[i] >= 0.0 : t[i] <= 0.0) side.emplace_back(std::abs(t[i]), prob[i]);
  std::sort(side.begin(), side.end());
  for (std::size_t i = 1; i < side.size(); ++i) {
    const double a = side[i - 1].second - 0.5, b = side[i].second - 0.5;
    if (a == 0.0) return side[i - 1].first;
    if ((a < 0.0) != (b < 0.0)) return side[i - 1].first + (side[i].first - side[i - 1].first) * a / (a - b);
  }
  return std::nan("");
}

inline std::vector<double> arange(const json& g, const std::string& name) {
  const double lo = get<double>(g, "lo"), hi = get<double>(g, "hi"), step = get<double>(g, "step");
  if (!(step > 0.0) || !(hi >= lo)) throw config_error("config: " + name + " needs lo <= hi and step > 0");
  std::vector<double> v;
  for (long i = 0;; ++i) {
    const double x = lo + static_cast<double>(i) * step;
    if (x > hi + 1e-9 * step) break;
    v.push_back(std::round(x * 1e9) / 1e9 + 0.0);  // drop accumulated rounding and -0
  }
  return v;
}

}  // namespace detail

inline RunOutput run_boundary(const json& cfg) {
  using namespace detail;
  const Common c(cfg);
  if (c.d < 2) throw config_error("config: boundary needs d >= 2");
  const double n_ratio = positive(cfg, "n_ratio");
  const double p_ratio = positive(cfg, "p_ratio");
  const auto models = models_from(cfg);
  for (auto m : models)
    if (m != ModelTag::RF) throw config_error("config: boundary evaluates features at given inputs; only RF is supported");
  const auto train_loss = loss_from(cfg, get<std::string>(cfg, "train_loss"));
  if (!train_loss.trainable()) throw config_error("config: train_loss must be trainable");
  const auto grid = arange(cfg.at("grid"), "grid");
  const auto diag = arange(cfg.at("diag"), "diag");
  const int mc = get<int>(cfg, "mc_draws");
  if (mc < 1) throw config_error("config: mc_draws must be >= 1");
  {
    const auto probe = target_from(cfg.at("target"), c.d, 1, true);
    if (!probe.link.binary()) throw config_error("config: boundary needs a binary link");
    if (probe.s > 2) throw config_error("config: boundary slices support s <= 2");
  }

  const double d2 = static_cast<double>(c.d) * c.d;
  const Eigen::Index n = scaled(n_ratio, d2);
  const Eigen::Index p = scaled(p_ratio, d2);
  const double r2 = std::sqrt(0.5);

  // Inputs are generated in the frame x'_1 = (x_1 + x_2)/sqrt 2,
  // x'_2 = (x_1 - x_2)/sqrt 2 in which the target reads its first coordinate;
  // W is rotation invariant in law, so this is the same experiment.
  auto trial = [&](int t) {
    TrialOut out;
    const std::uint64_t ts = c.trial_seed(t);
    const auto we = sample_weights(c.d, static_cast<int>(p), derive_seed(ts, "weights"));
    const TargetSpec target = target_from(cfg.at("target"), c.d, derive_seed(ts, "target"), true);
    const ModelSampler rf{ModelTag::RF, &we, &target, c.sigma, c.mu};
    const auto batch = rf(n, derive_seed(ts, "train"));
    const auto fit = fit_ridge_erm(batch, train_loss, c.lambda, c.solver);
    out.stats.add(fit);
    out.values["train_error"] = mean_train_loss(fit.theta, batch, LossSpec::zero_one());

    auto p_plus = [&](double x1, double x2, std::uint64_t seed) {
      Rng rng(seed);
      Eigen::MatrixXd x = rng.normal_matrix(c.d, mc);
      x.row(0).setConstant(r2 * (x1 + x2));
      x.row(1).setConstant(r2 * (x1 - x2));
      const Eigen::VectorXd s = rf_features(we, c.sigma, x).transpose() * fit.theta;
      return static_cast<double>((s.array() > 0.0).count()) / mc;
    };
    std::size_t point = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t j = 0; j < grid.size(); ++j, ++point)
        out.values[key({"grid", std::to_string(i), std::to_string(j)})] =
            p_plus(grid[i], grid[j], derive_seed(ts, "grid", point));
    std::vector<double> curve;
    for (std::size_t i = 0; i < diag.size(); ++i) {
      curve.push_back(p_plus(r2 * diag[i], r2 * diag[i], derive_seed(ts, "diag", i)));
      out.values[key({"diag", std::to_string(i)})] = curve.back();
    }
    out.values["crossing_pos"] = crossing(diag, curve, true);
    out.values["crossing_neg"] = crossing(diag, curve, false);
    return out;
  };
  const auto trials = run_indexed<TrialOut>(c.trials, c.threads, trial);

  RunOutput ro{ResultTable("boundary"), {}, false};
  const std::string m = "RF";
  const Coords base{{"n_over_d2", n_ratio}, {"p_over_d2", p_ratio}};
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      Coords co = base;
      co.emplace_back("x1", grid[i]);
      co.emplace_back("x2", grid[j]);
      ro.table.add(m, co, "p_plus", column(trials, key({"grid", std::to_string(i), std::to_string(j)})));
    }
  std::vector<double> mean_curve;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    Coords co = base;
    co.emplace_back("t", diag[i]);
    const auto col = column(trials, key({"diag", std::to_string(i)}));
    ro.table.add(m, co, "p_plus_diag", col);
    mean_curve.push_back(ro.table.rows().back().value);
  }
  ro.table.add(m, base, "crossing_pos", column(trials, "crossing_pos"));
  ro.table.add(m, base, "crossing_neg", column(trials, "crossing_neg"));
  // crossings of the trial-averaged curve
  ro.table.add(ResultRow{m, base, "crossing_pos_mean_curve", crossing(diag, mean_curve, true), std::nullopt, c.trials});
  ro.table.add(ResultRow{m, base, "crossing_neg_mean_curve", crossing(diag, mean_curve, false), std::nullopt, c.trials});
  ro.table.add(m, base, "train_error", column(trials, "train_error"));
  ro.diagnostics = {{"solver", merged_stats(trials).to_json()}, {"hermite", c.hermite_json()}, {"n", n}, {"p", p},
                    {"frame", "x'_1 = (x_1 + x_2)/sqrt(2), x'_2 = (x_1 - x_2)/sqrt(2)"}};
  return ro;
}

// ---------------------------------------------------------------------------
// phase: interpolation probability over (p/n, second axis)
// ---------------------------------------------------------------------------

inline RunOutput run_phase(const json& cfg) {
  using namespace detail;
  const Common c(cfg);
  const double n_ratio = positive(cfg, "n_ratio");
  const auto p_ratios = positive_grid(cfg, "p_ratios");
  const auto models = models_from(cfg);
  const auto mu_star = get<std::vector<double>>(cfg, "mu_star");
  if (mu_star.empty()) throw config_error("config: mu_star must be nonempty");
  const double s_star = get<double>(cfg, "s_star");
  const auto axis_name = get<std::string>(cfg.at("axis"), "name");
  if (axis_name != "s_star" && axis_name != "mu0") throw config_error("config: axis.name must be s_star or mu0");
  const auto axis = get<std::vector<double>>(cfg.at("axis"), "values");
  if (axis.empty()) throw config_error("config: axis.values must be nonempty");
  InterpolationOptions io;
  try {
    io.method = FitOptions::parse_method(get<std::string>(cfg.at("interpolation"), "method"));
  } catch (const precondition_error& e) {
    throw config_error(e.what());
  }
  io.max_iter = get<int>(cfg.at("interpolation"), "max_iter");

  const double d2 = static_cast<double>(c.d) * c.d;
  const Eigen::Index n = scaled(n_ratio, d2);

  auto target_at = [&](double a) {
    auto mu = mu_star;
    double s = s_star;
    if (axis_name == "s_star")
      s = a;
    else
      mu[0] = a;
    return logistic_single_index(mu, s);
  };

  auto trial = [&](int t) {
    TrialOut out;
    const std::uint64_t ts = c.trial_seed(t);
    for (std::size_t pi = 0; pi < p_ratios.size(); ++pi) {
      const Eigen::Index p = scaled(p_ratios[pi], static_cast<double>(n));
      const auto we = sample_weights(c.d, static_cast<int>(p), derive_seed(ts, "weights", pi));
      for (std::size_t ai = 0; ai < axis.size(); ++ai) {
        const TargetSpec target = target_at(axis[ai]);
        for (auto tag : models) {
          const ModelSampler s{tag, &we, &target, c.sigma, c.mu};
          out.values[key({to_string(tag), std::to_string(pi), std::to_string(ai)})] =
              interpolation_check(s(n, derive_seed(ts, "train", pi)), io) ? 1.0 : 0.0;
        }
      }
    }
    return out;
  };
  const auto trials = run_indexed<TrialOut>(c.trials, c.threads, trial);

  RunOutput ro{ResultTable("phase"), {}, false};
  for (auto tag : models)
    for (std::size_t ai = 0; ai < axis.size(); ++ai)
      for (std::size_t pi = 0; pi < p_ratios.size(); ++pi)
        ro.table.add(to_string(tag), {{"p_over_n", p_ratios[pi]}, {axis_name, axis[ai]}, {"n_over_d2", n_ratio}},
                     "interpolation_probability",
                     column(trials, key({to_string(tag), std::to_string(pi), std::to_string(ai)})));
  ro.diagnostics = {{"hermite", c.hermite_json()}, {"n", n}, {"axis", axis_name}};
  return ro;
}

// ---------------------------------------------------------------------------
// descent: train and test logistic loss along a p or n sweep
// ---------------------------------------------------------------------------

inline RunOutput run_descent(const json& cfg) {
  using namespace detail;
  const Common c(cfg);
  const auto mode = get<std::string>(cfg, "mode");
  if (mode != "p_sweep" && mode != "n_sweep") throw config_error("config: mode must be p_sweep or n_sweep");
  const auto models = models_from(cfg);
  const auto train_loss = loss_from(cfg, get<std::string>(cfg, "train_loss"));
  const auto test_loss = loss_from(cfg, get<std::string>(cfg, "test_loss"));
  if (!train_loss.trainable()) throw config_error("config: train_loss must be trainable");
  const auto mu_star = get<std::vector<double>>(cfg, "mu_star");
  if (mu_star.empty()) throw config_error("config: mu_star must be nonempty");
  const TargetSpec target = logistic_single_index(mu_star, get<double>(cfg, "s_star"));

  const double d2 = static_cast<double>(c.d) * c.d;
  struct Point {
    Eigen::Index n, p;
    Coords coords;
  };
  std::vector<Point> points;
  if (mode == "p_sweep") {
    const double n_ratio = positive(cfg, "n_ratio");
    const Eigen::Index n = scaled(n_ratio, d2);
    for (double r : positive_grid(cfg, "p_ratios")) {
      const Eigen::Index p = scaled(r, static_cast<double>(n));
      points.push_back({n, p, {{"p_over_n", r}, {"n_over_d2", n_ratio}, {"p_over_d2", static_cast<double>(p) / d2}}});
    }
  } else {
    const double p_ratio = positive(cfg, "p_ratio");
    const Eigen::Index p = scaled(p_ratio, d2);
    for (double r : positive_grid(cfg, "n_ratios")) {
      const Eigen::Index n = scaled(r, d2);
      points.push_back({n, p, {{"n_over_d2", r}, {"p_over_d2", p_ratio}, {"p_over_n", static_cast<double>(p) / n}}});
    }
  }

  auto trial = [&](int t) {
    TrialOut out;
    const std::uint64_t ts = c.trial_seed(t);
    for (std::size_t gi = 0; gi < points.size(); ++gi) {
      const auto we = sample_weights(c.d, static_cast<int>(points[gi].p), derive_seed(ts, "weights", gi));
      for (auto tag : models) {
        const ModelSampler s{tag, &we, &target, c.sigma, c.mu};
        const auto batch = s(points[gi].n, derive_seed(ts, "train", gi));
        const auto fit = fit_ridge_erm(batch, train_loss, c.lambda, c.solver);
        out.stats.add(fit);
        const std::string m = to_string(tag);
        out.values[key({m, "train", std::to_string(gi)})] = mean_train_loss(fit.theta, batch, train_loss);
        out.values[key({m, "test", std::to_string(gi)})] =
            shared_test_losses(s, {{&fit.theta, test_loss}}, c.n_test, derive_seed(ts, "test", gi))[0];
        out.values[key({m, "theta_norm", std::to_string(gi)})] = fit.theta.norm();
      }
    }
    return out;
  };
  const auto trials = run_indexed<TrialOut>(c.trials, c.threads, trial);

  RunOutput ro{ResultTable("descent"), {}, false};
  for (auto tag : models)
    for (const char* metric : {"train", "test", "theta_norm"})
      for (std::size_t gi = 0; gi < points.size(); ++gi) {
        const std::string name = std::string(metric) == "theta_norm" ? "theta_norm" : std::string(metric) + "_loss";
        ro.table.add(to_string(tag), points[gi].coords, name,
                     column(trials, key({to_string(tag), metric, std::to_string(gi)})));
      }
  ro.diagnostics = {{"solver", merged_stats(trials).to_json()}, {"hermite", c.hermite_json()}, {"mode", mode}};
  return ro;
}

// ---------------------------------------------------------------------------
// diagnose: spectra and genericity of one weight ensemble and target
// ---------------------------------------------------------------------------

inline RunOutput run_diagnose(const json& cfg) {
  using namespace detail;
  const Common c(cfg);
  const double p_ratio = positive(cfg, "p_ratio");
  const Eigen::Index p = scaled(p_ratio, static_cast<double>(c.d) * c.d);
  const auto n_mc = get<std::int64_t>(cfg, "n_mc");
  if (n_mc < 1000) throw config_error("config: n_mc must be at least 1000");
  SpectraCaps caps;
  const json& sc = cfg.at("spectra");
  caps.max_p = get<Eigen::Index>(sc, "max_p");
  caps.v2_centered = get<double>(sc, "v2_centered");
  caps.order3 = get<double>(sc, "order3");
  caps.order4 = get<double>(sc, "order4");
  caps.order5 = get<double>(sc, "order5");
  if (p > caps.max_p) throw config_error("config: p exceeds spectra.max_p");
  (void)target_from(cfg.at("target"), c.d, 1, false);

  auto trial = [&](int t) {
    TrialOut out;
    const std::uint64_t ts = c.trial_seed(t);
    const auto we = sample_weights(c.d, static_cast<int>(p), derive_seed(ts, "weights"));
    out.diag["spectra"] = spectra_report(we, caps, derive_seed(ts, "power"));
    const auto& s = out.diag["spectra"];
    out.values["v2_centered_op"] = s["v2"]["centered_op"].get<double>();
    out.values["v2_spike_op"] = s["v2"]["spike_op"].get<double>();
    out.values["v2_full_op"] = s["v2"]["full_op"].get<double>();
    bool pass = s["v2"]["pass"].get<bool>();
    for (const char* k : {"3", "4", "5"}) {
      out.values[std::string("higher_gram_") + k] = s["higher_gram"][k]["residual_op"].get<double>();
      pass = pass && s["higher_gram"][k]["pass"].get<bool>();
    }
    if (s.contains("gram_hadamard_residual"))
      for (const char* k : {"1", "2", "3", "4"})
        out.values[std::string("gram_hadamard_") + k] = s["gram_hadamard_residual"][k].get<double>();
    const TargetSpec target = target_from(cfg.at("target"), c.d, derive_seed(ts, "target"), false);
    json gen = json::array();
    for (std::size_t i = 0; i < target.higher.size(); ++i) {
      const auto r = genericity_report(target.higher[i], n_mc, derive_seed(ts, "genericity", i));
      gen.push_back(r);
      const std::string tag = "order" + std::to_string(r.order) + "_" + std::to_string(i);
      out.values["kurtosis_" + tag] = r.kurtosis;
      out.values["contraction_max_" + tag] = *std::max_element(r.contraction_norms.begin(), r.contraction_norms.end());
      out.values["generic_" + tag] = r.generic_at_default_tol ? 1.0 : 0.0;
    }
    out.diag["genericity"] = gen;
    out.values["spectra_pass"] = pass ? 1.0 : 0.0;
    return out;
  };
  const auto trials = run_indexed<TrialOut>(c.trials, c.threads, trial);

  RunOutput ro{ResultTable("diagnose"), {}, false};
  const Coords base{{"d", static_cast<double>(c.d)}, {"p", static_cast<double>(p)}};
  for (const auto& [name, v] : trials.front().values) ro.table.add("-", base, name, column(trials, name));
  json per_trial = json::array();
  for (const auto& t : trials) per_trial.push_back(t.diag);
  ro.diagnostics = {{"hermite", c.hermite_json()}, {"trials", per_trial}};
  return ro;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

inline RunOutput run_selftest(const json& cfg) {
  const auto seed = get<std::uint64_t>(cfg, "master_seed");
  const Fault fault = parse_fault(get<std::string>(cfg, "fault"));
  const auto checks = run_selftest_checks(seed, fault);
  RunOutput ro{ResultTable("selftest"), {}, false};
  json failures = json::array();
  for (const auto& ch : checks) {
    ro.table.add(ResultRow{ch.pass ? "pass" : "FAIL", {{"tol", ch.tol}}, ch.name, ch.value, std::nullopt, 1});
    if (!ch.pass) {
      failures.push_back(ch.name);
      ro.selftest_failed = true;
    }
  }
  ro.diagnostics = {{"checks", to_json_checks(checks)}, {"failures", failures}, {"fault", get<std::string>(cfg, "fault")}};
  return ro;
}

/// Dispatches on cfg["experiment"]; records wall time in the diagnostics.
inline RunOutput run_experiment(const json& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto name = get<std::string>(cfg, "experiment");
  RunOutput out;
  if (name == "lossgrid")
    out = run_lossgrid(cfg);
  else if (name == "marginal")
    out = run_marginal(cfg);
  else if (name == "boundary")
    out = run_boundary(cfg);
  else if (name == "phase")
    out = run_phase(cfg);
  else if (name == "descent")
    out = run_descent(cfg);
  else if (name == "diagnose")
    out = run_diagnose(cfg);
  else if (name == "selftest")
    out = run_selftest(cfg);
  else
    throw config_error("unknown experiment: " + name);
  out.diagnostics["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.diagnostics["experiment"] = name;
  out.diagnostics["version"] = kVersion;
  return out;
}

}  // namespace chaoslab::harness
