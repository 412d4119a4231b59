#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace chaoslab {

/// SplitMix64 finalizer. Used for every seed derivation in the library.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child seed for a (role, trial) pair:
///   mix64(mix64(master ^ fnv1a(role)) + index).
/// Streams therefore depend only on the master seed, the role tag and the
/// trial index, never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view role,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(master ^ fnv1a(role)) + index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }

  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal();
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    fill_normal(v);
    return v;
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    fill_normal(m);
    return m;
  }

  /// Uniform point on the unit sphere of R^n.
  Eigen::VectorXd unit_vector(Eigen::Index n) {
    Eigen::VectorXd v = normal_vector(n);
    double norm = v.norm();
    while (norm == 0.0) {
      v = normal_vector(n);
      norm = v.norm();
    }
    return v / norm;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace chaoslab
