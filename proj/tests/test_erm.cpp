#include <cmath>

#include <gtest/gtest.h>

#include "chaoslab/erm.hpp"

namespace cl = chaoslab;

namespace {

const cl::LossSpec kTrainable[] = {cl::LossSpec::squared(), cl::LossSpec::logistic(), cl::LossSpec::hinge(0.1)};

// Bisection on the first-order condition, used as an independent prox oracle.
double prox_bisect(double y, double z, double gamma, const cl::LossSpec& loss) {
  double lo = z - 100.0, hi = z + 100.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    (loss.d1(y, mid) + (mid - z) / gamma > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Problem {
  Eigen::MatrixXd z;
  Eigen::VectorXd y;
};

Problem random_problem(cl::Rng& rng, int p, int n, bool binary) {
  Problem pr{rng.normal_matrix(p, n) / std::sqrt(double(p)), rng.normal_vector(n)};
  if (binary)
    for (Eigen::Index i = 0; i < n; ++i) pr.y[i] = pr.y[i] >= 0.0 ? 1.0 : -1.0;
  return pr;
}

}  // namespace

TEST(Loss, ValuesAtKnownPoints) {
  EXPECT_DOUBLE_EQ(cl::LossSpec::squared().value(1.0, 3.0), 2.0);
  EXPECT_NEAR(cl::LossSpec::logistic().value(1.0, 0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(cl::LossSpec::logistic().value(-1.0, 800.0), 800.0, 1e-9);
  const auto h = cl::LossSpec::hinge(0.1);
  EXPECT_DOUBLE_EQ(h.value(1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(h.value(1.0, 2.0), 0.0);
  EXPECT_NEAR(h.value(1.0, 0.9), 0.1, 1e-15);
  EXPECT_NEAR(h.value(1.0, 1.0), 0.025, 1e-15);
  const auto z1 = cl::LossSpec::zero_one();
  EXPECT_EQ(z1.value(1.0, 0.0), 0.0);
  EXPECT_EQ(z1.value(-1.0, 0.0), 1.0);
  EXPECT_EQ(z1.value(-1.0, -0.1), 0.0);
  EXPECT_THROW(z1.d1(1.0, 0.0), cl::loss_error);
  EXPECT_THROW(cl::LossSpec::parse("cauchy"), cl::loss_error);
  EXPECT_EQ(cl::LossSpec::parse("hinge").name(), "hinge");
}

TEST(Loss, GradientsMatchFiniteDifferences) {
  cl::Rng rng(3);
  for (const auto& loss : kTrainable)
    for (int rep = 0; rep < 100; ++rep) {
      const double y = loss.kind == cl::LossSpec::Kind::squared ? rng.normal() : (rng.uniform() < 0.5 ? -1.0 : 1.0);
      double x = 2.0 * rng.normal();
      if (loss.kind == cl::LossSpec::Kind::hinge) {
        // keep clear of the two kinks of the second derivative
        while (std::abs(std::abs(y * x - 1.0) - loss.delta) < 1e-3) x = 2.0 * rng.normal();
      }
      const double h = 1e-6;
      const double fd1 = (loss.value(y, x + h) - loss.value(y, x - h)) / (2.0 * h);
      EXPECT_NEAR(loss.d1(y, x), fd1, 1e-6 * std::max(1.0, std::abs(fd1))) << loss.name();
      const double fd2 = (loss.d1(y, x + h) - loss.d1(y, x - h)) / (2.0 * h);
      EXPECT_NEAR(loss.d2(y, x), fd2, 1e-6 * std::max(1.0, std::abs(fd2))) << loss.name();
    }
}

TEST(Loss, ObjectiveGradientMatchesFiniteDifferences) {
  cl::Rng rng(4);
  for (const auto& loss : kTrainable) {
    auto pr = random_problem(rng, 6, 15, loss.kind != cl::LossSpec::Kind::squared);
    const double lambda = 0.3;
    const Eigen::VectorXd theta = rng.normal_vector(6);
    const Eigen::VectorXd g = cl::detail::gradient(pr.z, loss, pr.y, pr.z.transpose() * theta, theta, lambda);
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += 1e-6;
      tm[j] -= 1e-6;
      const double fd = (cl::detail::objective(loss, pr.y, pr.z.transpose() * tp, tp, lambda) -
                         cl::detail::objective(loss, pr.y, pr.z.transpose() * tm, tm, lambda)) /
                        2e-6;
      EXPECT_NEAR(g[j], fd, 1e-6 * std::max(1.0, std::abs(fd))) << loss.name();
    }
  }
}

TEST(Prox, SquaredClosedForm) {
  EXPECT_DOUBLE_EQ(cl::prox(2.0, 1.0, 0.5, cl::LossSpec::squared()), (1.0 + 0.5 * 2.0) / 1.5);
}

TEST(Prox, LogisticReferencePoint) {
  const double x = cl::prox(1.0, 0.0, 1.0, cl::LossSpec::logistic());
  EXPECT_NEAR(x, prox_bisect(1.0, 0.0, 1.0, cl::LossSpec::logistic()), 1e-10);
  EXPECT_NEAR(x * (1.0 + std::exp(x)), 1.0, 1e-10);
  EXPECT_NEAR(x, 0.401, 1e-3);
}

TEST(Prox, FirstOrderConditionAndSmallGamma) {
  cl::Rng rng(5);
  for (const auto& loss : kTrainable)
    for (int rep = 0; rep < 200; ++rep) {
      const double y = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double z = 3.0 * rng.normal();
      const double gamma = std::exp(3.0 * rng.normal());
      const double x = cl::prox(y, z, gamma, loss);
      EXPECT_LE(std::abs(loss.d1(y, x) + (x - z) / gamma), 1e-10 * std::max(1.0, 1.0 / gamma))
          << loss.name() << " y=" << y << " z=" << z << " gamma=" << gamma;
      EXPECT_NEAR(x, prox_bisect(y, z, gamma, loss), 1e-8 * std::max(1.0, std::abs(x)));
    }
  for (const auto& loss : kTrainable) {
    const double gamma = 1e-7;
    EXPECT_LE(std::abs(cl::prox(1.0, 0.3, gamma, loss) - 0.3), gamma * 1.0 + 1e-15);
  }
  EXPECT_THROW(cl::prox(1.0, 0.0, 0.0, cl::LossSpec::logistic()), cl::precondition_error);
  EXPECT_THROW(cl::prox(1.0, 0.0, 1.0, cl::LossSpec::zero_one()), cl::loss_error);
}

TEST(Moreau, CenteringAndLipschitz) {
  EXPECT_NEAR(cl::moreau(0.0, 0.0, 1.0, cl::LossSpec::logistic()), 0.0, 1e-12);
  for (const auto& loss : {cl::LossSpec::logistic(), cl::LossSpec::hinge(0.1)}) {
    double worst = 0.0;
    const double h = 1e-5;
    for (double y : {-1.0, -0.5, 0.5, 1.0})
      for (double z = -4.0; z <= 4.0; z += 0.25)
        for (double gamma : {0.1, 0.5, 1.0, 2.0, 5.0}) {
          const double m = cl::moreau(y, z, gamma, loss);
          worst = std::max(worst, std::abs(cl::moreau(y + h, z, gamma, loss) - m) / h);
          worst = std::max(worst, std::abs(cl::moreau(y, z + h, gamma, loss) - m) / h);
          worst = std::max(worst, std::abs(cl::moreau(y, z, gamma + h, loss) - m) / h);
        }
    EXPECT_LE(worst, 10.0) << loss.name();
  }
}

TEST(Fit, AcceleratedMatchesClosedFormRidge) {
  cl::Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int p = 5 + static_cast<int>(rng.uniform() * 395);
    const int n = 5 + static_cast<int>(rng.uniform() * 395);
    auto pr = random_problem(rng, p, n, false);
    const double lambda = 0.05;
    const auto fit = cl::fit_ridge_erm(pr.z, pr.y, cl::LossSpec::squared(), lambda, {.tol = 1e-10});
    const Eigen::VectorXd ref = cl::ridge_closed_form(pr.z, pr.y, lambda);
    EXPECT_TRUE(fit.converged) << fit.grad_norm << " after " << fit.iterations;
    EXPECT_LE((fit.theta - ref).norm(), 1e-6 * ref.norm()) << "p=" << p << " n=" << n;
  }
}

TEST(Fit, NewtonMatchesAcceleratedOnEveryLoss) {
  cl::Rng rng(8);
  for (const auto& loss : kTrainable)
    for (auto [p, n] : {std::pair{30, 80}, std::pair{120, 50}}) {
      auto pr = random_problem(rng, p, n, loss.kind != cl::LossSpec::Kind::squared);
      const double lambda = 0.01;
      const auto a = cl::fit_ridge_erm(pr.z, pr.y, loss, lambda, {.tol = 1e-9, .max_iter = 200000});
      const auto b =
          cl::fit_ridge_erm(pr.z, pr.y, loss, lambda, {.tol = 1e-9, .method = cl::FitOptions::Method::newton});
      EXPECT_TRUE(a.converged) << loss.name();
      EXPECT_TRUE(b.converged) << loss.name();
      EXPECT_LE((a.theta - b.theta).norm(), 1e-6 * std::max(1.0, b.theta.norm())) << loss.name() << " p=" << p;
    }
}

TEST(Fit, ObjectiveIsMonotone) {
  cl::Rng rng(9);
  for (const auto& loss : kTrainable)
    for (auto method : {cl::FitOptions::Method::accelerated, cl::FitOptions::Method::newton}) {
      auto pr = random_problem(rng, 40, 60, loss.kind != cl::LossSpec::Kind::squared);
      const auto fit = cl::fit_ridge_erm(pr.z, pr.y, loss, 1e-3, {.method = method, .record_history = true});
      ASSERT_GE(fit.history.size(), 2u);
      for (std::size_t i = 1; i < fit.history.size(); ++i)
        EXPECT_LE(fit.history[i], fit.history[i - 1] + 1e-14 * std::abs(fit.history[i - 1])) << loss.name();
    }
}

TEST(Fit, HeavyPenaltyAndToySeparable) {
  cl::Rng rng(10);
  auto pr = random_problem(rng, 10, 30, false);
  const auto heavy = cl::fit_ridge_erm(pr.z, pr.y, cl::LossSpec::squared(), 1e6);
  const double scale = (pr.z * pr.y / 30.0).norm() / 1e6;
  EXPECT_LE(heavy.theta.norm(), 1.0001 * scale);

  Eigen::MatrixXd z(2, 4);
  z << 1.0, 2.0, -1.0, -2.0, 0.5, -0.5, 0.3, -0.2;
  Eigen::VectorXd y(4);
  y << 1.0, 1.0, -1.0, -1.0;
  const auto fit = cl::fit_ridge_erm(z, y, cl::LossSpec::logistic(), 0.1);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.grad_norm, 1e-8);
  EXPECT_LT(fit.risk, std::log(2.0));
  EXPECT_EQ(fit.iterations > 0, true);
}

TEST(Fit, Preconditions) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(2, 3);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  EXPECT_THROW(cl::fit_ridge_erm(z, y, cl::LossSpec::zero_one(), 1.0), cl::loss_error);
  EXPECT_THROW(cl::fit_ridge_erm(z, y, cl::LossSpec::squared(), 0.0), cl::precondition_error);
  EXPECT_THROW(cl::fit_ridge_erm(z, y, cl::LossSpec::squared(), 1e-7), cl::precondition_error);
  const auto capped = cl::fit_ridge_erm(z, y, cl::LossSpec::logistic(), 1e-6, {.tol = 1e-14, .max_iter = 2});
  EXPECT_FALSE(capped.converged);
  EXPECT_EQ(capped.iterations, 2);
  auto j = cl::fit_json(capped);
  EXPECT_TRUE(j.contains("risk") && j.contains("grad_norm") && j.contains("iterations") && j.contains("theta"));
  EXPECT_FALSE(cl::fit_json(capped, 1).contains("theta"));
}

TEST(TestError, RandomLabelsAndUnitLatent) {
  auto we = cl::sample_weights(6, 5, 1);
  cl::TargetSpec t;
  t.s = 1;
  t.link = cl::LinkSpec::logistic_sign(0.0);
  const auto sigma = cl::ActivationSpec::relu();
  const auto mu = cl::hermite_coeffs(sigma);
  cl::ModelSampler rf{cl::ModelTag::RF, &we, &t, sigma, mu};
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
  const auto e01 = cl::test_error(zero, rf, cl::LossSpec::zero_one(), 20000, 3);
  EXPECT_LE(std::abs(e01.value - 0.5), 4.0 * e01.se);

  cl::TargetSpec lin;
  lin.s = 1;
  lin.link = cl::LinkSpec::identity_sum();
  cl::ModelSampler ge{cl::ModelTag::GE, &we, &lin, sigma, mu};
  const auto esq = cl::test_error(zero, ge, cl::LossSpec::squared(), 20000, 4);
  EXPECT_LE(std::abs(esq.value - 0.5), 4.0 * esq.se);  // E[y^2]/2 with unit-variance latent
  EXPECT_THROW(cl::test_error(zero, ge, cl::LossSpec::squared(), 99, 4), cl::capacity_error);
}

TEST(Interpolation, TrivialCases) {
  Eigen::MatrixXd z(3, 1);
  z << 0.5, -1.0, 2.0;
  Eigen::VectorXd y(1);
  y << -1.0;
  EXPECT_TRUE(cl::interpolation_check(z, y));
  Eigen::MatrixXd dup(3, 2);
  dup.col(0) = z.col(0);
  dup.col(1) = z.col(0);
  Eigen::VectorXd yy(2);
  yy << 1.0, -1.0;
  for (auto m : {cl::FitOptions::Method::accelerated, cl::FitOptions::Method::newton}) {
    EXPECT_FALSE(cl::interpolation_check(dup, yy, {.method = m}));
    EXPECT_TRUE(cl::interpolation_check(z, y, {.method = m}));
  }
  Eigen::VectorXd bad(1);
  bad << 0.5;
  EXPECT_THROW(cl::interpolation_check(z, bad), cl::label_error);
}

TEST(Interpolation, GaussianCoverThreshold) {
  // Random labels on Gaussian points are separable w.h.p. iff p/n > 1/2.
  cl::Rng rng(12);
  for (auto m : {cl::FitOptions::Method::accelerated, cl::FitOptions::Method::newton}) {
    int below = 0, above = 0;
    for (int rep = 0; rep < 10; ++rep) {
      auto lo = random_problem(rng, 60, 200, true);
      auto hi = random_problem(rng, 140, 200, true);
      below += cl::interpolation_check(lo.z, lo.y, {.method = m});
      above += cl::interpolation_check(hi.z, hi.y, {.method = m});
    }
    EXPECT_LE(below, 1);
    EXPECT_GE(above, 9);
  }
}
