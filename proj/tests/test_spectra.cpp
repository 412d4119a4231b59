#include <cmath>

#include <gtest/gtest.h>

#include "chaoslab/spectra.hpp"

namespace cl = chaoslab;

TEST(GramHadamard, IdentityHoldsForSmallEnsembles) {
  EXPECT_EQ(cl::gram_hadamard_check(cl::sample_weights(10, 20, 1), 1), 0.0);
  for (int d : {3, 8, 10, 16})
    for (int p : {1, 20, 64})
      for (int k = 2; k <= 4; ++k)
        EXPECT_LE(cl::gram_hadamard_check(cl::sample_weights(d, p, 100 * d + p), k), 1e-10) << d << " " << p << " " << k;
  EXPECT_THROW(cl::gram_hadamard_check(cl::sample_weights(17, 3, 1), 2), cl::capacity_error);
}

TEST(OpNorm, MatchesSingularValue) {
  cl::Rng rng(2);
  const Eigen::MatrixXd a = rng.normal_matrix(30, 20);
  const double ref = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()[0];
  EXPECT_NEAR(cl::op_norm(a), ref, 1e-5 * ref);
  Eigen::MatrixXd sym = Eigen::MatrixXd::Zero(3, 3);
  sym.diagonal() << 1.0, -4.0, 2.0;
  EXPECT_NEAR(cl::op_norm(sym), 4.0, 1e-5);
}

TEST(V2Spike, MeanRowAndSinglePoint) {
  auto one = cl::sample_weights(7, 1, 3);
  const auto s1 = cl::v2_spike_decomposition(one);
  EXPECT_LE(s1.centered_op, 1.0 + 1e-9);
  EXPECT_NEAR(s1.spike_op, std::sqrt(1.0 / 7.0), 1e-15);
  EXPECT_NEAR(s1.full_op, 1.0, 1e-6);

  // the subtracted row is the exact mean of q_2(w) over the sphere
  auto big = cl::sample_weights(6, 20000, 4);
  const Eigen::VectorXd mean = big.v2().colwise().mean().transpose();
  const cl::BasisIndexer idx(6, 2);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto t = idx.tuple(r);
    EXPECT_NEAR(mean[static_cast<Eigen::Index>(r)], t[0] == t[1] ? 1.0 / 6.0 : 0.0, 0.01);
  }
}

TEST(V2Spike, CenteredPartBoundedWhileSpikeGrows) {
  const auto s30 = cl::v2_spike_decomposition(cl::sample_weights(30, 450, 5));
  EXPECT_LE(s30.centered_op, 5.0);
  double prev_spike = 0.0;
  for (int d : {10, 20, 40}) {
    const auto s = cl::v2_spike_decomposition(cl::sample_weights(d, d * d / 2, 6 + d));
    EXPECT_GT(s.spike_op, prev_spike);
    EXPECT_LE(s.centered_op, 5.0);
    EXPECT_GE(s.full_op, s.spike_op - s.centered_op);
    prev_spike = s.spike_op;
  }
}

TEST(HigherGram, StructureResiduals) {
  auto we = cl::sample_weights(40, 800, 7);
  EXPECT_LE(cl::higher_gram_structure(we, 3), 2.0);
  EXPECT_LE(cl::higher_gram_structure(we, 4), 2.0);
  EXPECT_LE(cl::higher_gram_structure(we, 5), 1.0);
  EXPECT_NEAR(cl::higher_gram_structure(cl::sample_weights(5, 1, 1), 5), 0.0, 1e-12);
  EXPECT_THROW(cl::higher_gram_structure(we, 2), cl::order_error);
  cl::SpectraCaps tight;
  tight.max_p = 100;
  EXPECT_THROW(cl::higher_gram_structure(we, 3, tight), cl::capacity_error);
}

TEST(SpectraReport, Fields) {
  auto j = cl::spectra_report(cl::sample_weights(8, 30, 2));
  EXPECT_TRUE(j.contains("gram_hadamard_residual"));
  EXPECT_TRUE(j["v2"]["pass"].get<bool>());
  for (const char* k : {"3", "4", "5"}) EXPECT_TRUE(j["higher_gram"][k].contains("residual_op"));
  EXPECT_FALSE(cl::spectra_report(cl::sample_weights(20, 10, 2)).contains("gram_hadamard_residual"));
}
