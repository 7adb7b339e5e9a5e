#include "sgtmle/lasso.hpp"

#include "sgtmle/glm.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sgtmle;

namespace {

struct Problem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Problem random_problem(Eigen::Index n, Eigen::Index p, Family family, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  Problem pr;
  pr.x.resize(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) pr.x(i, j) = gauss(rng);
  // a couple of correlated columns to exercise the solver
  if (p >= 4) pr.x.col(3) = 0.9 * pr.x.col(0) + 0.1 * pr.x.col(3);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta[0] = 1.0;
  if (p > 1) beta[1] = -0.6;
  Eigen::VectorXd lp = pr.x * beta;
  pr.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    pr.y[i] = family == Family::gaussian ? lp[i] + gauss(rng)
                                         : (unif(rng) < expit(lp[i]) ? 1.0 : 0.0);
  return pr;
}

double soft(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

TEST_CASE("lambda_path is log-spaced and descending") {
  auto path = lambda_path(2.0, 5, 1e-2);
  REQUIRE(path.size() == 5);
  CHECK(path.front() == doctest::Approx(2.0));
  CHECK(path.back() == doctest::Approx(0.02));
  for (std::size_t k = 1; k < path.size(); ++k) CHECK(path[k] < path[k - 1]);
}

TEST_CASE("above lambda_max every penalized coefficient is exactly zero") {
  for (Family family : {Family::gaussian, Family::binomial}) {
    auto pr = random_problem(80, 6, family, 101);
    const double lmax = lasso_lambda_max(pr.x, pr.y, family);
    auto fit = fit_lasso(pr.x, pr.y, {10.0 * lmax}, family);
    REQUIRE(fit.coefs.size() == 1);
    CHECK(fit.coefs[0].cwiseAbs().maxCoeff() == 0.0);
    const double mean = pr.y.mean();
    const double expect = family == Family::gaussian ? mean : logit(mean);
    CHECK(fit.intercepts[0] == doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("orthonormal gaussian design reduces to soft-thresholded OLS") {
  // +/-1 columns with exact zero mean, unit variance, zero cross moment
  Eigen::MatrixXd x(8, 2);
  x.col(0) << 1, 1, 1, 1, -1, -1, -1, -1;
  x.col(1) << 1, 1, -1, -1, 1, 1, -1, -1;
  Eigen::VectorXd y(8);
  y << 2.1, 0.4, -0.3, 1.2, 0.9, -1.5, 0.2, -0.8;
  const double n = 8.0;
  for (double lambda : {0.02, 0.1, 0.3, 1.0}) {
    auto fit = fit_lasso(x, y, {lambda}, Family::gaussian);
    const double q0 = x.col(0).dot(y) / n;
    const double q1 = x.col(1).dot(y) / n;
    CHECK(fit.coefs[0][0] == doctest::Approx(soft(q0, lambda)).epsilon(1e-7));
    CHECK(fit.coefs[0][1] == doctest::Approx(soft(q1, lambda)).epsilon(1e-7));
    CHECK(fit.intercepts[0] == doctest::Approx(y.mean()).epsilon(1e-7));
  }
}

TEST_CASE("unpenalized column at lambda_max matches the single-variable GLM") {
  auto pr = random_problem(120, 5, Family::gaussian, 202);
  const std::vector<int> unpen{2};
  const double lmax = lasso_lambda_max(pr.x, pr.y, Family::gaussian, unpen);
  auto fit = fit_lasso(pr.x, pr.y, {lmax * (1.0 + 1e-12)}, Family::gaussian, unpen);
  for (Eigen::Index j = 0; j < 5; ++j)
    if (j != 2) CHECK(fit.coefs[0][j] == 0.0);
  Eigen::MatrixXd xj(120, 2);
  xj.col(0).setOnes();
  xj.col(1) = pr.x.col(2);
  auto ols = fit_linear(xj, pr.y);
  CHECK(fit.coefs[0][2] == doctest::Approx(ols.coef[1]).epsilon(1e-6));
  CHECK(std::abs(fit.coefs[0][2]) > 1e-8);  // marginally associated by construction
}

TEST_CASE("KKT residuals stay below tolerance along the whole path") {
  for (Family family : {Family::gaussian, Family::binomial}) {
    auto pr = random_problem(60, 12, family, 303);
    const double lmax = lasso_lambda_max(pr.x, pr.y, family);
    auto path = lambda_path(lmax, 30, 1e-3);
    auto fit = fit_lasso(pr.x, pr.y, path, family);
    CHECK(fit.converged);
    REQUIRE(fit.kkt_residuals.size() == path.size());
    for (double r : fit.kkt_residuals) CHECK(r <= 1e-7);
    // reported residuals agree with an independent recomputation
    for (std::size_t k = 0; k < path.size(); k += 7) {
      const double recomputed = lasso_kkt_residual(pr.x, pr.y, fit.intercepts[k],
                                                   fit.coefs[k], path[k], family);
      CHECK(recomputed <= 1e-7);
    }
  }
}

TEST_CASE("warm-started path matches cold starts at each lambda") {
  for (Family family : {Family::gaussian, Family::binomial}) {
    auto pr = random_problem(70, 8, family, 404);
    const double lmax = lasso_lambda_max(pr.x, pr.y, family);
    auto path = lambda_path(lmax, 12, 1e-2);
    auto warm = fit_lasso(pr.x, pr.y, path, family);
    for (std::size_t k = 0; k < path.size(); k += 3) {
      auto cold = fit_lasso(pr.x, pr.y, {path[k]}, family);
      CHECK((warm.coefs[k] - cold.coefs[0]).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK(std::abs(warm.intercepts[k] - cold.intercepts[0]) <= 1e-6);
    }
  }
}

TEST_CASE("weighted fits solve the weighted stationarity conditions") {
  auto pr = random_problem(90, 6, Family::gaussian, 505);
  Eigen::VectorXd w(90);
  std::mt19937_64 rng(506);
  for (Eigen::Index i = 0; i < 90; ++i)
    w[i] = 0.2 + static_cast<double>(rng() % 100) / 50.0;
  const double lmax = lasso_lambda_max(pr.x, pr.y, Family::gaussian, {}, &w);
  auto path = lambda_path(lmax, 10, 1e-2);
  auto fit = fit_lasso(pr.x, pr.y, path, Family::gaussian, {}, &w);
  for (std::size_t k = 0; k < path.size(); ++k) {
    CHECK(lasso_kkt_residual(pr.x, pr.y, fit.intercepts[k], fit.coefs[k], path[k],
                             Family::gaussian, {}, &w) <= 1e-7);
  }
}

TEST_CASE("invalid inputs are rejected") {
  auto pr = random_problem(40, 3, Family::gaussian, 606);
  CHECK_THROWS_AS(fit_lasso(pr.x, pr.y, {}, Family::gaussian), std::exception);
  Eigen::MatrixXd bad = pr.x;
  bad(5, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_lasso(bad, pr.y, {0.1}, Family::gaussian), std::exception);
}

TEST_CASE("constant columns never enter the model") {
  auto pr = random_problem(50, 4, Family::gaussian, 707);
  pr.x.col(2).setConstant(3.0);
  const double lmax = lasso_lambda_max(pr.x, pr.y, Family::gaussian);
  auto fit = fit_lasso(pr.x, pr.y, lambda_path(lmax, 8, 1e-2), Family::gaussian);
  for (const auto& b : fit.coefs) CHECK(b[2] == 0.0);
}
