#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "chaoslab/hermite.hpp"
#include "chaoslab/rng.hpp"

namespace cl = chaoslab;

namespace {

// Explicit-sum formula, kept independent of the recurrence under test.
double he_explicit(int k, double x) {
  double acc = 0.0;
  for (int i = 0; 2 * i <= k; ++i)
    acc += ((i % 2) ? -1.0 : 1.0) * std::pow(x, k - 2 * i) /
           (std::pow(2.0, i) * cl::factorial(i) * cl::factorial(k - 2 * i));
  return std::sqrt(cl::factorial(k)) * acc;
}

}  // namespace

TEST(Hermite, KnownValues) {
  EXPECT_DOUBLE_EQ(cl::he(0, 3.7), 1.0);
  EXPECT_NEAR(cl::he(2, 0.0), -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(cl::he(3, 1.0), (1.0 - 3.0) / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(cl::he(3, 1.0), -0.81650, 1e-5);
  EXPECT_THROW(cl::he(-1, 0.0), cl::order_error);
}

TEST(Hermite, RecurrenceMatchesExplicitFormula) {
  for (int k = 0; k <= 10; ++k)
    for (double x = -4.0; x <= 4.0; x += 0.25)
      EXPECT_NEAR(cl::he(k, x), he_explicit(k, x), 1e-9 * (1.0 + std::abs(he_explicit(k, x)))) << k << " " << x;
}

TEST(Hermite, UptoAgreesWithSingle) {
  std::vector<double> v(8);
  cl::he_upto(1.3, v);
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(v[k], cl::he(k, 1.3), 1e-14);
}

TEST(Hermite, TranslationIdentity) {
  for (int k = 0; k <= 5; ++k)
    for (double x = -2.0; x <= 2.0; x += 0.5)
      for (double y = -1.5; y <= 1.5; y += 0.75) {
        double rhs = 0.0;
        for (int i = 0; i <= k; ++i)
          rhs += cl::binomial(k, i) * std::sqrt(cl::factorial(i)) * cl::he(i, x) * std::pow(y, k - i);
        EXPECT_NEAR(std::sqrt(cl::factorial(k)) * cl::he(k, x + y), rhs, 1e-9);
      }
}

TEST(Hermite, ScalingIdentity) {
  for (double gamma : {0.5, 2.0})
    for (int k = 0; k <= 5; ++k)
      for (double x = -2.0; x <= 2.0; x += 0.5) {
        double rhs = 0.0;
        for (int i = 0; 2 * i <= k; ++i)
          rhs += std::pow(gamma, k - 2 * i) * std::pow(gamma * gamma - 1.0, i) * cl::binomial(k, 2 * i) *
                 cl::factorial(2 * i) / (cl::factorial(i) * std::pow(2.0, i)) * std::sqrt(cl::factorial(k - 2 * i)) *
                 cl::he(k - 2 * i, x);
        EXPECT_NEAR(std::sqrt(cl::factorial(k)) * cl::he(k, gamma * x), rhs, 1e-9);
      }
}

TEST(Hermite, OrthonormalityMonteCarloSmall) {
  constexpr int n = 200000;
  constexpr int kmax = 4;
  cl::Rng rng(11);
  std::vector<double> sum((kmax + 1) * (kmax + 1), 0.0), sumsq(sum.size(), 0.0);
  std::vector<double> h(kmax + 1);
  for (int s = 0; s < n; ++s) {
    cl::he_upto(rng.normal(), h);
    for (int j = 0; j <= kmax; ++j)
      for (int k = 0; k <= kmax; ++k) {
        const double v = h[j] * h[k];
        sum[j * (kmax + 1) + k] += v;
        sumsq[j * (kmax + 1) + k] += v * v;
      }
  }
  for (int j = 0; j <= kmax; ++j)
    for (int k = 0; k <= kmax; ++k) {
      const std::size_t c = j * (kmax + 1) + k;
      const double mean = sum[c] / n;
      const double se = std::sqrt(std::max(sumsq[c] / n - mean * mean, 0.0) / n);
      EXPECT_LE(std::abs(mean - (j == k ? 1.0 : 0.0)), 5.0 * se + 1e-12) << j << "," << k;
    }
}

TEST(BasisIndexer, DimensionsAndPrefixProperty) {
  EXPECT_EQ(cl::basis_dim(40, 2), 820u);
  EXPECT_EQ(cl::basis_dim(40, 3), 11480u);
  EXPECT_EQ(cl::basis_dim(5, 0), 1u);
  const cl::BasisIndexer big(6, 3);
  const cl::BasisIndexer small(3, 3);
  ASSERT_EQ(big.size(), 56u);
  for (std::size_t r = 0; r < small.size(); ++r) {
    auto a = big.tuple(r);
    auto b = small.tuple(r);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  for (std::size_t r = 0; r < big.size(); ++r) EXPECT_EQ(big.rank(big.tuple(r)), r);
}

TEST(BasisIndexer, GradedReverseLexOrderAtDegreeTwo) {
  const cl::BasisIndexer idx(3, 2);
  // x1^2, x1x2, x2^2, x1x3, x2x3, x3^2
  const std::vector<std::vector<int>> expected = {{2, 0, 0}, {1, 1, 0}, {0, 2, 0}, {1, 0, 1}, {0, 1, 1}, {0, 0, 2}};
  for (std::size_t r = 0; r < idx.size(); ++r) EXPECT_EQ(idx.multi_index(r).exponents, expected[r]);
  EXPECT_EQ(idx.rank(cl::MultiIndex{{0, 1, 1}}), 4u);
  EXPECT_THROW(idx.rank(cl::MultiIndex{{1, 1, 1}}), cl::order_error);
}

TEST(QK, Examples) {
  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(4, 0);
  Eigen::VectorXd q = cl::q_k(e1, 2);
  const cl::BasisIndexer idx(4, 2);
  EXPECT_DOUBLE_EQ(q[idx.rank(cl::MultiIndex{{2, 0, 0, 0}})], 1.0);
  EXPECT_DOUBLE_EQ(q.norm(), 1.0);

  cl::Rng rng(3);
  Eigen::VectorXd w = rng.unit_vector(7);
  EXPECT_LE((cl::q_k(w, 1) - w).norm(), 1e-15);

  Eigen::VectorXd w2(2);
  w2 << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  Eigen::VectorXd q2 = cl::q_k(w2, 2);
  const cl::BasisIndexer i2(2, 2);
  EXPECT_NEAR(q2[i2.rank(cl::MultiIndex{{2, 0}})], 0.5, 1e-15);
  EXPECT_NEAR(q2[i2.rank(cl::MultiIndex{{0, 2}})], 0.5, 1e-15);
  EXPECT_NEAR(q2[i2.rank(cl::MultiIndex{{1, 1}})], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(q2.norm(), 1.0, 1e-15);

  Eigen::VectorXd bad = 1.01 * w;
  EXPECT_THROW(cl::q_k(bad, 2), cl::precondition_error);
}

TEST(QK, UnitNormAndFeatureIdentity) {
  cl::Rng rng(5);
  for (int k = 1; k <= 4; ++k) {
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::VectorXd w = rng.unit_vector(5);
      Eigen::VectorXd x = rng.normal_vector(5);
      Eigen::VectorXd q = cl::q_k(w, k);
      EXPECT_NEAR(q.norm(), 1.0, 1e-12);
      EXPECT_NEAR(q.dot(cl::hermite_features(x, k)), cl::he(k, w.dot(x)), 1e-10);
    }
  }
}

TEST(Quadrature, GaussHermiteMoments) {
  const auto rule = cl::gauss_hermite(6);
  // E[G^{2m}] = (2m-1)!!
  const double moments[] = {1, 0, 1, 0, 3, 0, 15, 0, 105, 0, 945};
  for (int p = 0; p <= 10; ++p) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * std::pow(rule.nodes[i], p);
    EXPECT_NEAR(acc, moments[p], 1e-10 * (1.0 + moments[p]));
  }
}

TEST(HermiteCoeff, SquareActivation) {
  const auto sq = cl::ActivationSpec::square();
  EXPECT_NEAR(cl::hermite_coeff(sq, 0), 1.0, 1e-12);
  EXPECT_NEAR(cl::hermite_coeff(sq, 1), 0.0, 1e-12);
  EXPECT_NEAR(cl::hermite_coeff(sq, 2), std::sqrt(2.0), 1e-12);
  EXPECT_THROW(cl::hermite_coeff(sq, 3), cl::order_error);
  const auto poly = cl::ActivationSpec::polynomial({0.0, 0.0, 1.0});
  EXPECT_NEAR(cl::hermite_coeff(poly, 2), std::sqrt(2.0), 1e-12);
}

TEST(HermiteCoeff, HermiteBasisIsOrthonormal) {
  for (int j = 0; j <= 6; ++j) {
    std::vector<double> mu(j + 1, 0.0);
    mu[j] = 1.0;
    auto sigma = cl::ActivationSpec::from_hermite(mu);
    sigma.degree_cap = 6;
    for (int k = 0; k <= 6; ++k) EXPECT_NEAR(cl::hermite_coeff(sigma, k), j == k ? 1.0 : 0.0, 1e-12);
  }
}

TEST(HermiteCoeff, Relu) {
  const auto relu = cl::ActivationSpec::relu();
  const auto c = cl::hermite_coeffs(relu);
  EXPECT_NEAR(c.mu[0], 1.0 / std::sqrt(2.0 * M_PI), 1e-12);
  EXPECT_NEAR(c.mu[1], 0.5, 1e-12);
  EXPECT_NEAR(c.mu[2], 1.0 / (2.0 * std::sqrt(M_PI)), 1e-12);
  EXPECT_NEAR(c.mu[3], 0.0, 1e-12);
  // E relu(G)^2 = 1/2; the tail beyond D = 8 is below 1e-2.
  EXPECT_GT(c.mu.squaredNorm(), 0.49);
  EXPECT_LE(c.mu.squaredNorm(), 0.5 + 1e-12);
  EXPECT_NEAR(c.mu_gt2 * c.mu_gt2, c.mu.tail(c.mu.size() - 3).squaredNorm(), 1e-15);
}

TEST(HermiteCoeff, ParsevalForRandomPolynomials) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> mono(7);
    for (auto& c : mono) c = u(gen);
    const auto sigma = cl::ActivationSpec::polynomial(mono);
    const auto coeffs = cl::hermite_coeffs(sigma);
    // E[sigma(G)^2] with a rule exact to degree 13
    const auto rule = cl::gauss_hermite(8);
    double second = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) second += rule.weights[i] * std::pow(sigma(rule.nodes[i]), 2);
    EXPECT_NEAR(coeffs.mu.squaredNorm(), second, 1e-9 * (1.0 + second));
  }
}

TEST(HermiteCoeff, FromHermiteRoundTrip) {
  const std::vector<double> mu = {0.3, -1.2, 0.7, 0.25, -0.1};
  const auto sigma = cl::ActivationSpec::from_hermite(mu);
  EXPECT_EQ(sigma.degree(), 4);
  for (double x : {-1.7, 0.0, 0.4, 2.2}) {
    double expect = 0.0;
    for (int k = 0; k < 5; ++k) expect += mu[k] * cl::he(k, x);
    EXPECT_NEAR(sigma(x), expect, 1e-12);
  }
}
