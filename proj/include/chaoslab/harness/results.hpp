#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "chaoslab/stats.hpp"

namespace chaoslab::harness {

#ifndef CHAOSLAB_VERSION
#define CHAOSLAB_VERSION "0.0.0"
#endif

inline constexpr const char* kVersion = CHAOSLAB_VERSION;

using Coords = std::vector<std::pair<std::string, double>>;

struct ResultRow {
  std::string model;
  Coords coords;
  std::string metric;
  double value = 0.0;
  std::optional<double> se;  // absent when trials == 1
  int trials = 0;
};

/// Mean and standard error over per-trial values; the SE is absent for a
/// single trial.
inline ResultRow aggregate(std::string model, Coords coords, std::string metric, const std::vector<double>& per_trial) {
  ResultRow r{std::move(model), std::move(coords), std::move(metric), 0.0, std::nullopt,
              static_cast<int>(per_trial.size())};
  const auto e = stats::mean_se(std::span<const double>(per_trial.data(), per_trial.size()));
  r.value = e.value;
  if (per_trial.size() > 1) r.se = e.se;
  return r;
}

/// Long-format table. Coordinate columns are the union of coordinate names
/// in first-seen order; cells a row does not define stay empty.
class ResultTable {
 public:
  explicit ResultTable(std::string experiment = "") : experiment_(std::move(experiment)) {}

  void add(ResultRow r) { rows_.push_back(std::move(r)); }

  void add(std::string model, Coords coords, std::string metric, const std::vector<double>& per_trial) {
    rows_.push_back(aggregate(std::move(model), std::move(coords), std::move(metric), per_trial));
  }

  const std::vector<ResultRow>& rows() const { return rows_; }
  const std::string& experiment() const { return experiment_; }

  /// First row matching model, metric and every given coordinate.
  const ResultRow* find(const std::string& model, const std::string& metric, const Coords& where = {}) const {
    for (const auto& r : rows_) {
      if (r.model != model || r.metric != metric) continue;
      bool ok = true;
      for (const auto& [k, v] : where) {
        bool hit = false;
        for (const auto& [rk, rv] : r.coords)
          if (rk == k && std::abs(rv - v) <= 1e-12 * std::max(1.0, std::abs(v))) hit = true;
        if (!hit) ok = false;
      }
      if (ok) return &r;
    }
    return nullptr;
  }

  std::vector<std::string> coordinate_names() const {
    std::vector<std::string> names;
    for (const auto& r : rows_)
      for (const auto& c : r.coords) {
        bool seen = false;
        for (const auto& n : names) seen = seen || n == c.first;
        if (!seen) names.push_back(c.first);
      }
    return names;
  }

  void write_csv(std::ostream& os, const std::string& config_hash, std::uint64_t seed) const {
    const auto names = coordinate_names();
    os << "experiment,model";
    for (const auto& n : names) os << ',' << n;
    os << ",metric,value,se,trials,config_hash,seed,version\n";
    for (const auto& r : rows_) {
      os << experiment_ << ',' << r.model;
      for (const auto& n : names) {
        os << ',';
        for (const auto& [k, v] : r.coords)
          if (k == n) os << num(v);
      }
      os << ',' << r.metric << ',' << num(r.value) << ',';
      if (r.se) os << num(*r.se);
      os << ',' << r.trials << ',' << config_hash << ',' << seed << ',' << kVersion << '\n';
    }
  }

 private:
  // Round-trip precision, locale independent.
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  std::string experiment_;
  std::vector<ResultRow> rows_;
};

}  // namespace chaoslab::harness
