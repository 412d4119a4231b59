#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaoslab/erm.hpp"
#include "chaoslab/error.hpp"
#include "chaoslab/hermite.hpp"
#include "chaoslab/models.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab::harness {

using nlohmann::json;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"lossgrid", "marginal", "boundary", "phase",
                                              "descent",  "diagnose", "selftest"};
  return names;
}

inline bool is_experiment(const std::string& name) {
  for (const auto& e : experiment_names())
    if (e == name) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Defaults. Each experiment starts from a complete document; user files and
// --set overrides may only touch keys that exist here (typos are errors).
// ---------------------------------------------------------------------------

inline json target_y_si() {
  // 1 + 2 He_2(x_1) + He_3(x_1)
  return {{"s", 1},
          {"higher", json::array()},
          {"pre", {{"kind", "hermite"}, {"coeffs", {1.0, 0.0, 2.0, 1.0}}}},
          {"out", "auto"},
          {"scale", 1.0},
          {"noise", {{"kind", "none"}, {"scale", 0.0}}}};
}

inline json target_y_r() {
  // 1 + 2 <beta_2, h_2> + <beta_3, h_3>, beta_k uniform on the sphere
  return {{"s", 0},
          {"higher", {{{"order", 2}, {"kind", "uniform_sphere"}}, {{"order", 3}, {"kind", "uniform_sphere"}}}},
          {"pre", {{"kind", "sum"}, {"weights", {2.0, 1.0}}, {"offset", 1.0}}},
          {"out", "auto"},
          {"scale", 1.0},
          {"noise", {{"kind", "none"}, {"scale", 0.0}}}};
}

inline json target_single_index(std::vector<double> coeffs, const std::string& out, double scale = 1.0) {
  return {{"s", 1},
          {"higher", json::array()},
          {"pre", {{"kind", "hermite"}, {"coeffs", coeffs}}},
          {"out", out},
          {"scale", scale},
          {"noise", {{"kind", "none"}, {"scale", 0.0}}}};
}

inline json common_defaults() {
  return {{"d", 40},
          {"lambda", 1e-3},
          {"trials", 10},
          {"master_seed", 1},
          {"n_test", 10000},
          {"threads", 1},
          {"activation", {{"kind", "relu"}, {"coefficients", json::array()}, {"degree_cap", 8}}},
          {"mu_override", nullptr},
          {"hinge_delta", 0.1},
          {"solver", {{"method", "newton"}, {"tol", 1e-8}, {"max_iter", 500}}},
          {"output", "results"}};
}

inline json default_config(const std::string& experiment) {
  json c = common_defaults();
  c["experiment"] = experiment;
  if (experiment == "lossgrid") {
    c["d"] = 50;
    c["n_ratio"] = 0.5;
    c["p_ratios"] = {0.5, 1.0, 2.0};
    c["models"] = {"RF", "GE", "CGE"};
    c["responses"] = {"y_SI", "y_R"};
    c["targets"] = {{"y_SI", target_y_si()}, {"y_R", target_y_r()}};
    c["cells"] = {{{"train", "squared"}, {"test", "squared"}},
                  {{"train", "squared"}, {"test", "zero_one"}},
                  {{"train", "hinge"}, {"test", "squared"}},
                  {{"train", "hinge"}, {"test", "zero_one"}}};
  } else if (experiment == "marginal") {
    c["d"] = 50;
    c["n_ratio"] = 1.0;
    c["p_ratio"] = 0.5;
    c["activation"]["kind"] = "square";
    c["models"] = {"RF", "GE", "CGE"};
    c["target"] = target_single_index({0.0, 0.0, 1.0}, "identity");
    c["train_loss"] = "squared";
    c["bins"] = 64;
    c["n_test"] = 20000;
  } else if (experiment == "boundary") {
    c["d"] = 30;
    c["n_ratio"] = 2.5;
    c["p_ratio"] = 1.5;
    c["trials"] = 4;
    c["models"] = {"RF"};
    c["target"] = target_single_index({0.0, 0.0, 1.0}, "sign");
    c["train_loss"] = "logistic";
    c["grid"] = {{"lo", -3.0}, {"hi", 3.0}, {"step", 0.25}};
    c["diag"] = {{"lo", -3.0}, {"hi", 3.0}, {"step", 0.05}};
    c["mc_draws"] = 200;
  } else if (experiment == "phase") {
    c["d"] = 50;
    c["n_ratio"] = 0.45;
    c["p_ratios"] = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0};
    c["trials"] = 60;
    c["models"] = {"RF"};
    c["mu_star"] = {2.0, 1.0, 2.0, 0.6};
    c["s_star"] = 4.0;
    c["axis"] = {{"name", "s_star"}, {"values", {0.0, 1.0, 2.0, 4.0, 8.0}}};
    c["interpolation"] = {{"method", "newton"}, {"max_iter", 50000}};
  } else if (experiment == "descent") {
    c["d"] = 40;
    c["lambda"] = 1e-4;
    c["mode"] = "p_sweep";
    c["n_ratio"] = 0.75;
    c["p_ratios"] = {0.1, 0.25, 0.4, 0.55, 0.7, 1.0, 1.5, 2.5};
    c["p_ratio"] = 1.0;
    c["n_ratios"] = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
    c["models"] = {"RF"};
    c["mu_star"] = {0.0, 1.0, 2.0, 0.6};
    c["s_star"] = 2.0;
    c["train_loss"] = "logistic";
    c["test_loss"] = "logistic";
  } else if (experiment == "diagnose") {
    c["d"] = 16;
    c["p_ratio"] = 0.5;
    c["target"] = target_y_r();
    c["n_mc"] = 100000;
    c["spectra"] = {{"max_p", 4096}, {"v2_centered", 5.0}, {"order3", 2.0}, {"order4", 2.0}, {"order5", 1.0}};
  } else if (experiment == "selftest") {
    c["fault"] = "none";
  } else {
    throw config_error("unknown experiment: " + experiment);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Merging and overrides
// ---------------------------------------------------------------------------

namespace detail {

// Recursive merge that rejects keys absent from the defaults. Arrays and
// scalars replace; objects merge, except the free-form `targets` map.
inline void strict_merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw config_error("config: expected an object at '" + path + "'");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) {
      if (path == "targets") {
        base[it.key()] = it.value();
        continue;
      }
      throw config_error("config: unknown key '" + key + "'");
    }
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object() && path.rfind("targets", 0) != 0 && it.key() != "pre" &&
        it.key() != "target")
      strict_merge(slot, it.value(), key);
    else
      slot = it.value();
  }
}

inline json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;  // bare strings need no quoting on the command line
  }
}

}  // namespace detail

/// Applies one `a.b.c=value` override; the path must already exist except
/// below `targets`.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw config_error("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const json value = detail::parse_value(assignment.substr(eq + 1));
  json* node = &cfg;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  bool free_form = false;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& key = parts[i];
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        throw config_error("--set: '" + key + "' is not an array index in '" + path + "'");
      }
      if (idx >= node->size()) throw config_error("--set: index out of range in '" + path + "'");
      node = &(*node)[idx];
      continue;
    }
    if (!node->is_object()) throw config_error("--set: '" + path + "' descends into a scalar");
    if (!node->contains(key) && !free_form) throw config_error("--set: unknown key '" + path + "'");
    if (i == 0 && key == "targets") free_form = true;
    node = &(*node)[key];
  }
  *node = value;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
}

/// Defaults for `experiment`, then the user document, then overrides.
inline json resolve_config(const std::string& experiment, const json& user, const std::vector<std::string>& sets) {
  if (!is_experiment(experiment)) throw config_error("unknown experiment: " + experiment);
  json cfg = default_config(experiment);
  if (!user.is_null()) {
    if (user.contains("experiment") && user["experiment"] != experiment)
      throw config_error("config file is for experiment '" + user["experiment"].get<std::string>() + "'");
    detail::strict_merge(cfg, user, "");
  }
  for (const auto& s : sets) apply_override(cfg, s);
  return cfg;
}

/// FNV-1a over the canonical dump, as 16 hex digits. Keys that cannot change
/// results (thread count, output path) are left out.
inline std::string config_hash(json cfg) {
  cfg.erase("threads");
  cfg.erase("output");
  const std::uint64_t h = fnv1a(cfg.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Typed views with validation
// ---------------------------------------------------------------------------

template <class T>
T get(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw config_error("config: missing '" + key + "'");
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("config: '" + key + "' has the wrong type");
  }
}

inline double positive(const json& cfg, const std::string& key) {
  const double v = get<double>(cfg, key);
  if (!(v > 0.0)) throw config_error("config: '" + key + "' must be positive");
  return v;
}

inline std::vector<double> positive_grid(const json& cfg, const std::string& key) {
  const auto v = get<std::vector<double>>(cfg, key);
  if (v.empty()) throw config_error("config: '" + key + "' must be a nonempty grid");
  for (double x : v)
    if (!(x > 0.0)) throw config_error("config: all values of '" + key + "' must be positive");
  return v;
}

inline ActivationSpec activation_from(const json& a) {
  const auto kind = get<std::string>(a, "kind");
  if (kind == "relu") {
    auto s = ActivationSpec::relu();
    if (a.contains("degree_cap")) s.degree_cap = get<int>(a, "degree_cap");
    return s;
  }
  if (kind == "square") return ActivationSpec::square();
  if (kind == "polynomial") return ActivationSpec::polynomial(get<std::vector<double>>(a, "coefficients"));
  if (kind == "hermite") return ActivationSpec::from_hermite(get<std::vector<double>>(a, "coefficients"));
  throw config_error("config: unknown activation kind '" + kind + "'");
}

inline HermiteCoeffs coeffs_from(const json& cfg, const ActivationSpec& sigma) {
  if (cfg.contains("mu_override") && !cfg["mu_override"].is_null()) {
    const auto mu = get<std::vector<double>>(cfg, "mu_override");
    if (mu.empty()) throw config_error("config: mu_override must be nonempty");
    return HermiteCoeffs::from(Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size())));
  }
  return hermite_coeffs(sigma);
}

inline std::vector<ModelTag> models_from(const json& cfg) {
  std::vector<ModelTag> out;
  for (const auto& name : get<std::vector<std::string>>(cfg, "models")) {
    try {
      out.push_back(parse_model_tag(name));
    } catch (const precondition_error& e) {
      throw config_error(e.what());
    }
  }
  if (out.empty()) throw config_error("config: 'models' must be nonempty");
  return out;
}

inline LossSpec loss_from(const json& cfg, const std::string& name) {
  try {
    return LossSpec::parse(name, cfg.contains("hinge_delta") ? get<double>(cfg, "hinge_delta") : 0.1);
  } catch (const chaoslab::error& e) {
    throw config_error(e.what());
  }
}

inline FitOptions solver_from(const json& cfg) {
  const json& s = cfg.at("solver");
  FitOptions o;
  try {
    o.method = FitOptions::parse_method(get<std::string>(s, "method"));
  } catch (const precondition_error& e) {
    throw config_error(e.what());
  }
  o.tol = get<double>(s, "tol");
  o.max_iter = get<int>(s, "max_iter");
  if (!(o.tol > 0.0) || o.max_iter < 1) throw config_error("config: solver tol and max_iter must be positive");
  return o;
}

/// Link output: explicit, or "auto" = identity unless a loss needs labels.
inline LinkSpec::Out out_from(const std::string& out, bool classification) {
  if (out == "identity") return LinkSpec::Out::identity;
  if (out == "sign") return LinkSpec::Out::sign;
  if (out == "logistic") return LinkSpec::Out::logistic;
  if (out == "auto") return classification ? LinkSpec::Out::sign : LinkSpec::Out::identity;
  throw config_error("config: unknown link output '" + out + "'");
}

/// Builds the target for one trial; uniform-sphere coefficients draw from
/// `seed` (one stream per coordinate).
inline TargetSpec target_from(const json& t, int d, std::uint64_t seed, bool classification) {
  TargetSpec spec;
  spec.s = get<int>(t, "s");
  int index = 0;
  for (const auto& h : t.at("higher")) {
    const int k = get<int>(h, "order");
    const auto kind = get<std::string>(h, "kind");
    try {
      if (kind == "uniform_sphere") {
        spec.higher.push_back(ChaosCoordinate::uniform_sphere(k, d, derive_seed(seed, "beta", index)));
      } else if (kind == "rank_one") {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
        if (h.contains("axis")) {
          const int axis = get<int>(h, "axis");
          if (axis < 0 || axis >= d) throw config_error("config: rank_one axis out of range");
          u[axis] = 1.0;
        } else {
          Rng rng(derive_seed(seed, "beta", index));
          u = rng.unit_vector(d);
        }
        spec.higher.push_back(ChaosCoordinate::rank_one(k, u));
      } else {
        throw config_error("config: unknown chaos coordinate kind '" + kind + "'");
      }
    } catch (const config_error&) {
      throw;
    } catch (const chaoslab::error& e) {
      throw config_error(std::string("config: ") + e.what());
    }
    ++index;
  }
  const json& pre = t.at("pre");
  const auto pre_kind = get<std::string>(pre, "kind");
  const auto out = out_from(get<std::string>(t, "out"), classification);
  const double scale = t.contains("scale") ? get<double>(t, "scale") : 1.0;
  if (pre_kind == "hermite") {
    spec.link = LinkSpec::hermite_poly(get<std::vector<double>>(pre, "coeffs"), out, scale);
  } else if (pre_kind == "sum") {
    spec.link = LinkSpec::identity_sum(pre.contains("weights") ? get<std::vector<double>>(pre, "weights")
                                                                : std::vector<double>{},
                                       pre.contains("offset") ? get<double>(pre, "offset") : 0.0);
    spec.link.out = out;
    spec.link.scale = scale;
  } else {
    throw config_error("config: unknown link pre-map '" + pre_kind + "'");
  }
  if (t.contains("noise")) {
    const auto kind = get<std::string>(t.at("noise"), "kind");
    const double sc = get<double>(t.at("noise"), "scale");
    if (kind == "none")
      spec.noise = NoiseSpec::none();
    else if (kind == "gaussian")
      spec.noise = NoiseSpec::gaussian(sc);
    else if (kind == "uniform")
      spec.noise = NoiseSpec::uniform(sc);
    else
      throw config_error("config: unknown noise kind '" + kind + "'");
  }
  try {
    spec.validate(d);
  } catch (const chaoslab::error& e) {
    throw config_error(std::string("config: invalid target: ") + e.what());
  }
  return spec;
}

/// Logistic single-index target sum_k mu_k He_k(x_1) with P(y = 1) = 1 / (1 + e^{-s f}).
inline TargetSpec logistic_single_index(const std::vector<double>& mu_star, double s_star) {
  TargetSpec t;
  t.s = 1;
  t.link = LinkSpec::hermite_poly(mu_star, LinkSpec::Out::logistic, s_star);
  return t;
}

/// Checks shared by every experiment except selftest.
inline void validate_common(const json& cfg) {
  const int d = get<int>(cfg, "d");
  if (d < 1) throw config_error("config: d must be >= 1");
  if (get<int>(cfg, "trials") < 1) throw config_error("config: trials must be >= 1");
  if (get<int>(cfg, "threads") < 1) throw config_error("config: threads must be >= 1");
  const double lambda = get<double>(cfg, "lambda");
  if (!(lambda >= kLambdaFloor)) throw config_error("config: lambda must be at least 1e-6");
  (void)get<std::uint64_t>(cfg, "master_seed");
  (void)activation_from(cfg.at("activation"));
  (void)solver_from(cfg);
}

}  // namespace chaoslab::harness
