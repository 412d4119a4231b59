#include <cmath>

#include <gtest/gtest.h>

#include "chaoslab/rng.hpp"
#include "chaoslab/tensor.hpp"

namespace cl = chaoslab;

namespace {

cl::Tensor random_symmetric(int k, int d, cl::Rng& rng) {
  const cl::BasisIndexer idx(d, k);
  return cl::iota(rng.normal_vector(static_cast<Eigen::Index>(idx.size())), k, d);
}

// Index-loop oracle for S (x)_r T with the last r indices of S paired against
// the first r indices of T.
cl::Tensor contract_brute(const cl::Tensor& s, const cl::Tensor& t, int r) {
  const int d = s.dim();
  const int ks = s.order() - r;
  const int kt = t.order() - r;
  cl::Tensor out(ks + kt, d);
  std::vector<int> free(ks + kt, 0);
  std::vector<int> shared(r, 0);
  for (std::size_t f = 0; f < out.size(); ++f) {
    free = out.coords(f);
    double acc = 0.0;
    std::size_t combos = 1;
    for (int i = 0; i < r; ++i) combos *= d;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t rem = c;
      for (int i = r - 1; i >= 0; --i) {
        shared[i] = static_cast<int>(rem % d);
        rem /= d;
      }
      std::vector<int> si(free.begin(), free.begin() + ks);
      si.insert(si.end(), shared.begin(), shared.end());
      std::vector<int> ti(shared.begin(), shared.end());
      ti.insert(ti.end(), free.begin() + ks, free.end());
      acc += s[s.offset(si)] * t[t.offset(ti)];
    }
    out[f] = acc;
  }
  return out;
}

}  // namespace

TEST(Iota, RankOneEmbedsOuterPower) {
  cl::Rng rng(1);
  for (int k = 1; k <= 3; ++k) {
    Eigen::VectorXd w = rng.unit_vector(4);
    cl::Tensor a = cl::iota(cl::q_k(w, k), k, 4);
    cl::Tensor b = cl::outer_power(w, k);
    for (std::size_t f = 0; f < a.size(); ++f) EXPECT_NEAR(a[f], b[f], 1e-14);
  }
}

TEST(Iota, OffDiagonalBasisVector) {
  const cl::BasisIndexer idx(4, 2);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(idx.size());
  v[idx.rank(cl::MultiIndex{{1, 1, 0, 0}})] = 1.0;
  cl::Tensor t = cl::iota(v, 2, 4);
  EXPECT_NEAR(t.at({0, 1}), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(t.at({1, 0}), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(t.frobenius_norm(), 1.0, 1e-15);
  EXPECT_THROW(cl::iota(Eigen::VectorXd::Zero(3), 2, 4), cl::precondition_error);
}

TEST(Iota, IsometryAndInverse) {
  cl::Rng rng(2);
  for (int k = 1; k <= 3; ++k) {
    const std::size_t b = cl::basis_dim(5, k);
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::VectorXd u = rng.normal_vector(b), v = rng.normal_vector(b);
      cl::Tensor tu = cl::iota(u, k, 5), tv = cl::iota(v, k, 5);
      EXPECT_NEAR(cl::inner(tu, tv), u.dot(v), 1e-12 * (1.0 + std::abs(u.dot(v))));
      EXPECT_TRUE(tu.symmetric());
      EXPECT_LE((cl::iota_inverse(tu) - u).norm(), 1e-12);
    }
  }
}

TEST(Contract, ClosedFormExamples) {
  cl::Rng rng(4);
  Eigen::VectorXd u = rng.unit_vector(6);
  cl::Tensor uu = cl::outer_power(u, 2);
  cl::Tensor c = cl::contract(uu, uu, 1);
  for (std::size_t f = 0; f < c.size(); ++f) EXPECT_NEAR(c[f], uu[f], 1e-15);
  EXPECT_NEAR(c.frobenius_norm(), 1.0, 1e-14);

  const int d = 6;
  cl::Tensor id(2, d);
  for (int i = 0; i < d; ++i) id.at({i, i}) = 1.0 / std::sqrt(double(d));
  cl::Tensor c2 = cl::contract(id, id, 1);
  EXPECT_NEAR(c2.frobenius_norm(), 1.0 / std::sqrt(double(d)), 1e-15);
  EXPECT_NEAR(c2.at({2, 2}), 1.0 / d, 1e-15);

  cl::Tensor prod = cl::contract(uu, uu, 0);
  EXPECT_EQ(prod.order(), 4);
  EXPECT_NEAR(prod.frobenius_norm(), 1.0, 1e-14);
  EXPECT_NEAR(cl::contract(uu, uu, 2)[0], 1.0, 1e-14);
}

TEST(Contract, MatchesIndexLoops) {
  cl::Rng rng(9);
  for (int d = 2; d <= 5; ++d)
    for (int k = 1; k <= 3; ++k)
      for (int l = 1; l <= 3; ++l)
        for (int r = 0; r <= std::min(k, l); ++r) {
          cl::Tensor s = random_symmetric(k, d, rng);
          cl::Tensor t = random_symmetric(l, d, rng);
          cl::Tensor fast = cl::contract(s, t, r);
          cl::Tensor slow = contract_brute(s, t, r);
          ASSERT_EQ(fast.size(), slow.size());
          for (std::size_t f = 0; f < fast.size(); ++f) EXPECT_NEAR(fast[f], slow[f], 1e-12);
        }
}

TEST(Contract, Errors) {
  cl::Tensor a(2, 3), b(2, 4), c(1, 3);
  EXPECT_THROW(cl::contract(a, b, 1), cl::precondition_error);
  EXPECT_THROW(cl::contract(a, c, 2), cl::precondition_error);
  EXPECT_THROW(cl::contract(a, c, -1), cl::precondition_error);
}

TEST(MonicChaos, RankOneMatchesHermite) {
  cl::Rng rng(12);
  for (int k = 1; k <= 3; ++k)
    for (int rep = 0; rep < 100; ++rep) {
      Eigen::VectorXd u = rng.unit_vector(5);
      Eigen::VectorXd x = rng.normal_vector(5);
      EXPECT_NEAR(cl::monic_chaos_eval(cl::outer_power(u, k), x), cl::he(k, u.dot(x)), 1e-10);
    }
}

TEST(MonicChaos, AgreesWithBasisFeatures) {
  cl::Rng rng(13);
  for (int k = 1; k <= 3; ++k) {
    const std::size_t b = cl::basis_dim(6, k);
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd beta = rng.normal_vector(b);
      Eigen::VectorXd x = rng.normal_vector(6);
      EXPECT_NEAR(cl::monic_chaos_eval(cl::iota(beta, k, 6), x), beta.dot(cl::hermite_features(x, k)), 1e-10);
    }
  }
}

TEST(MonicChaos, TracelessAtOriginAndUnsupportedOrder) {
  cl::Tensor t(2, 3);
  t.at({0, 0}) = 1.0;
  t.at({1, 1}) = -1.0;
  t.at({0, 2}) = t.at({2, 0}) = 0.3;
  EXPECT_DOUBLE_EQ(cl::monic_chaos_eval(t, Eigen::VectorXd::Zero(3)), 0.0);
  EXPECT_THROW(cl::monic_chaos_eval(cl::Tensor(4, 2), Eigen::VectorXd::Zero(2)), cl::order_error);
}

TEST(Wick, TrivialCases) {
  cl::Rng rng(21);
  Eigen::VectorXd w = rng.unit_vector(4);
  EXPECT_NEAR(cl::wick_product_mean({{2, w}, {2, w}}), 1.0, 1e-14);
  EXPECT_DOUBLE_EQ(cl::wick_product_mean({{1, w}, {1, w}, {1, w}}), 0.0);
  EXPECT_DOUBLE_EQ(cl::wick_product_mean({{3, w}}), 0.0);
  EXPECT_THROW(cl::wick_product_mean({{1, w}, {1, w}, {1, w}, {1, w}, {1, w}}), cl::capacity_error);
}

TEST(Wick, PairOfQuadraticsMatchesMonteCarlo) {
  cl::Rng rng(22);
  Eigen::VectorXd w1 = rng.unit_vector(3), w2 = rng.unit_vector(3);
  const double expected = std::pow(w1.dot(w2), 2);
  EXPECT_NEAR(cl::wick_product_mean({{2, w1}, {2, w2}}), expected, 1e-14);

  constexpr int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd x = rng.normal_vector(3);
    const double v = cl::he(2, w1.dot(x)) * cl::he(2, w2.dot(x));
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - expected), 4.0 * se);
}

TEST(Wick, MixedDegreesMatchMonteCarlo) {
  cl::Rng rng(23);
  Eigen::VectorXd w1 = rng.unit_vector(3), w2 = rng.unit_vector(3), w3 = rng.unit_vector(3);
  const double exact = cl::wick_product_mean({{1, w1}, {2, w2}, {1, w3}});
  constexpr int n = 400000;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd x = rng.normal_vector(3);
    const double v = cl::he(1, w1.dot(x)) * cl::he(2, w2.dot(x)) * cl::he(1, w3.dot(x));
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - exact), 4.0 * se);
  // single graph: edges (1,2),(2,3) -> sqrt(2) <w1,w2><w2,w3>
  EXPECT_NEAR(exact, std::sqrt(2.0) * w1.dot(w2) * w2.dot(w3), 1e-14);
}
