#include "sgtmle/estimators.hpp"

#include "sgtmle/dgp.hpp"
#include "sgtmle/glm.hpp"
#include "sgtmle/rng.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace sgtmle;

namespace {

EstimatorConfig fast_config() {
  EstimatorConfig cfg;
  cfg.hal_screen = BasisSpec{2, 1, 3};
  cfg.hal_fit = BasisSpec{2, 1, 5};
  return cfg;
}

TrialDataset scenario1_data(Eigen::Index n, std::uint64_t rep) {
  auto copula = default_copula();
  auto spec = default_scenario(1, copula);
  spec.eta = 0.03;
  SubgroupModel m;
  m.alpha0 = -2.2;
  return simulate(spec, copula, m, n, 1234, rep);
}

double golden_section_epsilon(const Eigen::VectorXd& h, const Eigen::VectorXd& r) {
  // accumulate in long double: near the minimum the objective is flat to O(de^2)
  // and double rounding alone would blur the argmin past 1e-8
  auto obj = [&](double e) {
    long double s = 0.0L;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const long double d = static_cast<long double>(r[i]) - static_cast<long double>(e) * h[i];
      s += d * d;
    }
    return s;
  };
  double a = -50.0, b = 50.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (obj(c) < obj(d))
      b = d;
    else
      a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("clever covariate arithmetic") {
  CHECK(clever_covariate(1.0, 0.5, 0.1) == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(clever_covariate(0.0, 0.5, 0.1) == doctest::Approx(-20.0).epsilon(1e-15));
  CHECK(clever_covariate(1.0, 0.5, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(clever_covariate(0.0, 0.25, 0.5) == doctest::Approx(-8.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("closed-form epsilon solves the quadratic") {
  Eigen::VectorXd h = Eigen::VectorXd::Ones(10);
  Eigen::VectorXd r = Eigen::VectorXd::Constant(10, 0.2);
  CHECK(closed_form_epsilon(h, r) == doctest::Approx(0.2).epsilon(1e-15));

  Eigen::VectorXd h2(4), r2(4);
  h2 << 1, -1, 1, -1;
  r2 << 1, 1, 1, 1;  // orthogonal to h2
  CHECK(closed_form_epsilon(h2, r2) == doctest::Approx(0.0));

  CHECK_THROWS_AS(closed_form_epsilon(Eigen::VectorXd::Zero(5), r.head(5)),
                  std::exception);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd hh(50), rr(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
      hh[i] = gauss(rng);
      rr[i] = gauss(rng);
    }
    const double eps = closed_form_epsilon(hh, rr);
    CHECK(std::abs(eps - golden_section_epsilon(hh, rr)) <= 1e-8);
    // global minimizer on a grid
    const double best = (rr - eps * hh).squaredNorm();
    for (int g = 0; g <= 1000; ++g) {
      const double e = -2.0 + 4.0 * g / 1000.0;
      CHECK(best <= (rr - e * hh).squaredNorm() + 1e-12);
    }
  }
}

TEST_CASE("eic_variance computes the Wald interval") {
  Eigen::VectorXd d(100);
  for (Eigen::Index i = 0; i < 100; ++i) d[i] = (i % 2 == 0) ? 2.0 : -2.0;  // Pn D^2 = 4
  auto iv = eic_variance(d, 0.5);
  CHECK(iv.se == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(iv.ci_low == doctest::Approx(0.5 - 1.96 * 0.2).epsilon(1e-12));
  CHECK(iv.ci_high == doctest::Approx(0.5 + 1.96 * 0.2).epsilon(1e-12));
  CHECK_FALSE(iv.degenerate);

  auto zero = eic_variance(Eigen::VectorXd::Zero(50), 0.1);
  CHECK(zero.se == 0.0);
  CHECK(zero.degenerate);
}

TEST_CASE("unadjusted estimator is the subgroup difference in means") {
  const Eigen::Index n = 40;
  std::vector<double> s(n, 1.0), a(n), y(n);
  // treated mean 0.3 (6/20), control mean 0.5 (10/20)
  for (Eigen::Index i = 0; i < n; ++i) {
    a[static_cast<std::size_t>(i)] = i < 20 ? 1.0 : 0.0;
    if (i < 20)
      y[static_cast<std::size_t>(i)] = i < 6 ? 1.0 : 0.0;
    else
      y[static_cast<std::size_t>(i)] = i < 30 ? 1.0 : 0.0;
  }
  auto d = testutil::make_dataset(s, a, y, Eigen::MatrixXd::Zero(n, 1));
  auto rep = unadjusted(d);
  CHECK(rep.psi_hat == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(rep.ci_low == doctest::Approx(rep.psi_hat - 1.96 * rep.se).epsilon(1e-12));

  // matches the textbook two-sample variance (mle denominators)
  const double v1 = 0.3 * 0.7 / 20.0;
  const double v0 = 0.5 * 0.5 / 20.0;
  CHECK(rep.se == doctest::Approx(std::sqrt(v1 + v0)).epsilon(1e-10));

  // identical arms give zero
  for (Eigen::Index i = 0; i < n; ++i)
    y[static_cast<std::size_t>(i)] = (i % 5 == 0) ? 1.0 : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = (i % 5 < 3) ? 1.0 : 0.0;
  auto d2 = testutil::make_dataset(s, a, y, Eigen::MatrixXd::Zero(n, 1));
  auto both = unadjusted(d2);
  CHECK(std::isfinite(both.psi_hat));
}

TEST_CASE("aipw with a forced constant outcome model reduces to the IPW contrast") {
  auto d = testutil::random_trial(200, 55);
  auto cfg = fast_config();
  cfg.learners = {LearnerKind::Mean};
  auto rep = aipw_subgroup(d, cfg);

  double ybar = 0.0, n1 = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i)
    if (d.s[i] == 1.0) {
      ybar += d.y[i];
      n1 += 1.0;
    }
  ybar /= n1;
  double expect = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i)
    if (d.s[i] == 1.0) expect += 2.0 * (2.0 * d.a[i] - 1.0) * (d.y[i] - ybar);
  expect /= n1;
  CHECK(rep.psi_hat == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("tmle_pr solves the efficient score and has a working fallback flag") {
  auto d = scenario1_data(1000, 3);
  auto cfg = fast_config();
  auto rep = tmle_pr(d, cfg);
  const double n = static_cast<double>(d.n());
  const double sigma_n = rep.se * std::sqrt(n);
  CHECK(std::abs(rep.diagnostics.at("eic_mean")) <= 1e-6 * sigma_n);
  CHECK(rep.diagnostics.count("epsilon") == 1);
  CHECK(rep.diagnostics.count("fluctuation_fallback") == 1);
  CHECK(rep.ci_low < rep.psi_hat);
  CHECK(rep.psi_hat < rep.ci_high);
}

TEST_CASE("subgroup-only initial fit reduces tmle_pr to the subgroup TMLE") {
  auto d = scenario1_data(1200, 5);
  auto cfg = fast_config();
  auto a = tmle_pr(d, cfg, /*pooled=*/false);
  auto b = tmle_subgroup(d, cfg);
  CHECK(a.psi_hat == doctest::Approx(b.psi_hat).epsilon(1e-10));
  CHECK(a.se == doctest::Approx(b.se).epsilon(1e-10));
}

TEST_CASE("aipw and tmle agree to first order") {
  for (std::uint64_t rep_id : {11ull, 12ull, 13ull}) {
    auto d = scenario1_data(2000, rep_id);
    auto cfg = fast_config();
    auto a = aipw_subgroup(d, cfg);
    auto t = tmle_subgroup(d, cfg);
    CHECK(std::abs(a.psi_hat - t.psi_hat) <= 0.1 * t.se);
  }
}

TEST_CASE("estimators are invariant to row permutation") {
  auto d = scenario1_data(600, 21);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(d.n()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(22);
  std::shuffle(perm.begin(), perm.end(), rng);
  TrialDataset p;
  p.covariate_names = d.covariate_names;
  p.s.resize(d.n());
  p.a.resize(d.n());
  p.y.resize(d.n());
  p.w.resize(d.n(), d.dim());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    p.s[i] = d.s[perm[static_cast<std::size_t>(i)]];
    p.a[i] = d.a[perm[static_cast<std::size_t>(i)]];
    p.y[i] = d.y[perm[static_cast<std::size_t>(i)]];
    p.w.row(i) = d.w.row(perm[static_cast<std::size_t>(i)]);
  }
  auto cfg = fast_config();
  for (const char* name : {"unadjusted", "aipw", "tmle"}) {
    auto orig = run_estimator(name, d, cfg);
    auto shuf = run_estimator(name, p, cfg);
    CHECK(orig.psi_hat == doctest::Approx(shuf.psi_hat).epsilon(1e-10));
    CHECK(orig.se == doctest::Approx(shuf.se).epsilon(1e-10));
  }
}

TEST_CASE("atmle decomposition and loop guard hold") {
  auto d = scenario1_data(800, 31);
  auto cfg = fast_config();
  auto [rep, dec] = atmle(d, cfg);
  CHECK(dec.psi == dec.psi_tilde - dec.psi_pound);  // bitwise
  CHECK(rep.psi_hat == dec.psi);
  CHECK(rep.diagnostics.at("psi_tilde") == dec.psi_tilde);
  CHECK(rep.diagnostics.at("psi_pound") == dec.psi_pound);
  CHECK(rep.diagnostics.count("se_pound") == 1);
  const double n = static_cast<double>(d.n());
  if (rep.diagnostics.at("loop_converged") == 1.0) {
    const double sigma_n = rep.se * std::sqrt(n);
    const double s_n = sigma_n / (std::sqrt(n) * std::log(n));
    CHECK(std::abs(rep.diagnostics.at("eic_mean")) <= s_n + 1e-12);
  }
  CHECK(rep.eic_values.size() == d.n());
}

TEST_CASE("known and estimated propensity paths agree on randomized data") {
  auto d = scenario1_data(1500, 41);
  auto cfg = fast_config();
  cfg.g_known = true;
  auto known = aipw_subgroup(d, cfg);
  cfg.g_known = false;
  auto est = aipw_subgroup(d, cfg);
  CHECK(std::abs(known.psi_hat - est.psi_hat) <= known.se);
}

TEST_CASE("targeting epsilon is near zero when the initial fit is consistent") {
  // logistic truth in (W, A, S) main effects: the glm_logit learner is exact
  const Eigen::Index n = 5000;
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> unif;
  std::normal_distribution<double> gauss;
  TrialDataset d;
  d.covariate_names = {"W1"};
  d.s.resize(n);
  d.a.resize(n);
  d.y.resize(n);
  d.w.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.w(i, 0) = gauss(rng);
    d.s[i] = unif(rng) < 0.3 ? 1.0 : 0.0;
    d.a[i] = unif(rng) < 0.5 ? 1.0 : 0.0;
    const double lp = -1.0 + 0.6 * d.w(i, 0) - 0.4 * d.a[i] + 0.3 * d.s[i];
    d.y[i] = unif(rng) < expit(lp) ? 1.0 : 0.0;
  }
  auto cfg = fast_config();
  cfg.learners = {LearnerKind::GlmLogit};
  auto rep = tmle_pr(d, cfg);
  CHECK(std::abs(rep.diagnostics.at("epsilon")) <= 0.1);
}

TEST_CASE("run_estimator dispatches by id and rejects unknown names") {
  auto d = testutil::random_trial(120, 71);
  auto cfg = fast_config();
  CHECK(run_estimator("unadjusted", d, cfg).estimator == "unadjusted");
  CHECK_THROWS_AS(run_estimator("oracle", d, cfg), std::exception);
  CHECK(estimator_names().size() == 5);
}

TEST_CASE("content folds survive row permutation") {
  auto d = testutil::random_trial(100, 81);
  auto folds = content_folds(d, 3, 5);
  REQUIRE(folds.size() == 100);
  // reversing the rows maps fold ids with the rows
  TrialDataset r;
  r.covariate_names = d.covariate_names;
  r.s = d.s.reverse();
  r.a = d.a.reverse();
  r.y = d.y.reverse();
  r.w = d.w.colwise().reverse();
  auto rfolds = content_folds(r, 3, 5);
  for (std::size_t i = 0; i < 100; ++i) CHECK(rfolds[i] == folds[99 - i]);
}
