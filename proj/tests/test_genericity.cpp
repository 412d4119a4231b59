#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "chaoslab/genericity.hpp"

namespace cl = chaoslab;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

// Coefficients of a symmetric matrix B under the iota embedding.
cl::ChaosCoordinate from_matrix(const Eigen::MatrixXd& b) {
  cl::Tensor t(2, static_cast<int>(b.rows()));
  for (int i = 0; i < b.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) t.at({i, j}) = b(i, j);
  Eigen::VectorXd beta = cl::iota_inverse(t);
  return cl::ChaosCoordinate::explicit_coeffs(2, beta / beta.norm());
}

}  // namespace

TEST(ContractionNorms, RankOneIsOne) {
  cl::Rng rng(1);
  for (int k : {2, 3}) {
    const auto u = rng.unit_vector(7);
    auto r1 = cl::contraction_norms(cl::ChaosCoordinate::rank_one(k, u));
    ASSERT_EQ(r1.size(), static_cast<std::size_t>(k - 1));
    for (double v : r1) EXPECT_DOUBLE_EQ(v, 1.0);
    // dense form of the same direction
    auto dense = cl::contraction_norms(cl::ChaosCoordinate::explicit_coeffs(k, cl::q_k(u, k)));
    for (double v : dense) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(ContractionNorms, ScaledIdentity) {
  for (int d : {4, 9, 25}) {
    auto beta = from_matrix(Eigen::MatrixXd::Identity(d, d) / std::sqrt(double(d)));
    auto n = cl::contraction_norms(beta);
    ASSERT_EQ(n.size(), 1u);
    EXPECT_NEAR(n[0], 1.0 / std::sqrt(double(d)), 1e-12);
  }
}

TEST(ContractionNorms, Order3MatchesGeneralContraction) {
  for (int d : {3, 5}) {
    auto beta = cl::ChaosCoordinate::uniform_sphere(3, d, 100 + d);
    const auto t = beta.tensor();
    auto n = cl::contraction_norms(beta);
    ASSERT_EQ(n.size(), 2u);
    EXPECT_NEAR(n[0], cl::contract(t, t, 1).frobenius_norm(), 1e-12);
    EXPECT_NEAR(n[1], cl::contract(t, t, 2).frobenius_norm(), 1e-12);
  }
}

TEST(ContractionNorms, UnsupportedOrder) {
  EXPECT_THROW(cl::contraction_norms(cl::ChaosCoordinate::rank_one(4, Eigen::VectorXd::Unit(3, 0))),
               cl::order_error);
}

TEST(KurtosisMC, RankOneOrder2IsTwelve) {
  cl::Rng rng(2);
  auto beta = cl::ChaosCoordinate::rank_one(2, rng.unit_vector(10));
  const auto est = cl::excess_kurtosis_mc(beta, 1000000, 3);
  EXPECT_GT(est.se, 0.0);
  EXPECT_LE(std::abs(est.value - 12.0), 4.0 * est.se) << est.value << " +- " << est.se;
}

TEST(KurtosisMC, LinearIsGaussian) {
  Eigen::VectorXd u = Eigen::VectorXd::Ones(4) / 2.0;
  const auto est = cl::excess_kurtosis_mc_with(4, 200000, 5, [&](const Eigen::MatrixXd& x, Eigen::VectorXd& out) {
    out = (u.transpose() * x).transpose();
  });
  EXPECT_LE(std::abs(est.value), 4.0 * est.se);
}

TEST(KurtosisMC, EigenSpreadMatchesCumulantSum) {
  cl::Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 2 + rep;  // d <= 12
    Eigen::MatrixXd g = rng.normal_matrix(d, d);
    auto beta = from_matrix((g + g.transpose()) / 2.0);
    const auto report = cl::kurtosis_contraction_consistency(beta, 200000, 40 + rep);
    EXPECT_NEAR(report.exact_kurtosis, report.eigen_kurtosis, 1e-10);
    EXPECT_TRUE(report.pass) << "d=" << d << " exact=" << report.exact_kurtosis << " mc=" << report.mc.value
                             << " se=" << report.mc.se;
  }
}

TEST(KurtosisMC, ScaledIdentityAndCapacity) {
  const int d = 8;
  auto beta = from_matrix(Eigen::MatrixXd::Identity(d, d));
  const auto report = cl::kurtosis_contraction_consistency(beta, 400000, 9);
  EXPECT_NEAR(report.exact_kurtosis, 12.0 / d, 1e-12);
  EXPECT_TRUE(report.pass);
  EXPECT_THROW(cl::excess_kurtosis_mc(beta, 999, 1), cl::capacity_error);
  EXPECT_THROW(cl::kurtosis_contraction_consistency(cl::ChaosCoordinate::uniform_sphere(3, 4, 1), 5000, 1),
               cl::order_error);
}

TEST(KurtosisMC, Order3DenseAgreesWithRankOne) {
  // Dense evaluation of q_3(u) must reproduce He_3(u.x) sample by sample.
  cl::Rng rng(11);
  const auto u = rng.unit_vector(4);
  const auto a = cl::excess_kurtosis_mc(cl::ChaosCoordinate::rank_one(3, u), 5000, 8);
  const auto b = cl::excess_kurtosis_mc(cl::ChaosCoordinate::explicit_coeffs(3, cl::q_k(u, 3)), 5000, 8);
  EXPECT_NEAR(a.value, b.value, 1e-9);
}

TEST(GenericBeta, UnitNormAndGenericAtModerateDimension) {
  std::vector<double> worst;
  int generic = 0;
  for (int seed = 0; seed < 20; ++seed) {
    auto g = cl::sample_generic_beta(40, 2, seed);
    EXPECT_NEAR(g.beta.coefficients().norm(), 1.0, 1e-10);
    worst.push_back(max_of(g.contraction_norms));
    generic += cl::generic_at(g.contraction_norms, cl::default_genericity_tol(40));
  }
  EXPECT_LE(median(worst), 0.5);
  EXPECT_GE(generic, 18);
  EXPECT_FALSE(cl::generic_at(cl::contraction_norms(cl::ChaosCoordinate::rank_one(2, Eigen::VectorXd::Unit(40, 3))),
                              cl::default_genericity_tol(40)));
}

TEST(GenericBeta, ContractionShrinksWithDimension) {
  std::vector<double> small, large;
  for (int seed = 0; seed < 15; ++seed) {
    small.push_back(max_of(cl::sample_generic_beta(6, 2, seed).contraction_norms));
    large.push_back(max_of(cl::sample_generic_beta(24, 2, seed).contraction_norms));
  }
  EXPECT_LT(median(large), median(small));
}

TEST(GenericBeta, Order3AtModerateDimension) {
  auto g = cl::sample_generic_beta(30, 3, 4);
  EXPECT_TRUE(cl::generic_at(g.contraction_norms, cl::default_genericity_tol(30)));
}

TEST(GenericityReport, JsonFields) {
  auto beta = cl::ChaosCoordinate::uniform_sphere(2, 12, 3);
  nlohmann::json j = cl::genericity_report(beta, 20000, 1);
  for (const char* key : {"order", "contraction_norms", "kurtosis", "se", "generic_at_default_tol"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["order"], 2);
  EXPECT_GT(j["se"].get<double>(), 0.0);
}
