#include "sgtmle/estimators.hpp"

#include "sgtmle/glm.hpp"
#include "sgtmle/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sgtmle {

namespace {

constexpr double kProbClamp = 1e-6;

double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

std::uint64_t row_hash(const TrialDataset& data, Eigen::Index i, std::uint64_t seed) {
  std::uint64_t h = stream_seed(seed, 0, "row-key");
  auto mix = [&h](double v) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 1099511628211ull;
    h ^= h >> 29;
  };
  mix(data.s[i]);
  mix(data.a[i]);
  mix(data.y[i]);
  for (Eigen::Index j = 0; j < data.dim(); ++j) mix(data.w(i, j));
  return h;
}

// nuisance CV fit and prediction in one step
Eigen::VectorXd cv_predict(const EstimatorConfig& config, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& y, const std::vector<int>& folds,
                           const Eigen::MatrixXd& at, bool truncate, long n_trunc) {
  CvSelector sel;
  sel.candidates = config.learners;
  sel.folds = config.cv_folds;
  sel.loss = CvLoss::log_likelihood;
  auto cv = cv_select(sel, X, y, folds);
  if (truncate) cv.model.trunc_delta = truncation_delta(n_trunc);
  return cv.model.predict(at);
}

struct SubgroupNuisances {
  std::vector<int> rows;      // indices of S=1 rows
  Eigen::VectorXd qa, q1, q0; // outcome regression at observed / a=1 / a=0
  Eigen::VectorXd g1;         // P(A=1 | S=1, W), truncated when estimated
  double p_s = 0.0;
  long n = 0;
};

// Shared by AIPW, subgroup TMLE, and TMLE-PR; `pooled` controls whether the
// outcome regression uses all rows with S as a predictor or only S=1 rows.
SubgroupNuisances fit_subgroup_nuisances(const TrialDataset& data,
                                         const EstimatorConfig& config, bool pooled) {
  validate(data);
  const auto counts = subgroup_counts(data);
  if (counts.n1 == 0) throw std::runtime_error("estimator: no rows with s == 1");

  SubgroupNuisances nu;
  nu.p_s = counts.p_s;
  nu.n = counts.n;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    if (data.s[i] == 1.0) nu.rows.push_back(static_cast<int>(i));
  const auto m = static_cast<Eigen::Index>(nu.rows.size());

  bool both_arms = false, arm1 = false, arm0 = false;
  for (int i : nu.rows) (data.a[i] == 1.0 ? arm1 : arm0) = true;
  both_arms = arm1 && arm0;
  if (!both_arms) throw std::runtime_error("estimator: subgroup lacks one treatment arm");

  const Eigen::Index d = data.dim();
  FitModel qmodel;
  if (pooled) {
    // features [W, A, S] over all rows
    Eigen::MatrixXd X(data.n(), d + 2);
    X.leftCols(d) = data.w;
    X.col(d) = data.a;
    X.col(d + 1) = data.s;
    auto folds = content_folds(data, config.cv_folds, config.seed);
    CvSelector sel{config.learners, config.cv_folds, CvLoss::log_likelihood};
    qmodel = cv_select(sel, X, data.y, folds).model;

    Eigen::MatrixXd at(m, d + 2);
    for (Eigen::Index k = 0; k < m; ++k) {
      at.row(k).head(d) = data.w.row(nu.rows[static_cast<std::size_t>(k)]);
      at(k, d) = data.a[nu.rows[static_cast<std::size_t>(k)]];
      at(k, d + 1) = 1.0;
    }
    nu.qa = qmodel.predict(at);
    at.col(d).setOnes();
    nu.q1 = qmodel.predict(at);
    at.col(d).setZero();
    nu.q0 = qmodel.predict(at);
  } else {
    auto sub = subgroup_rows(data);
    Eigen::MatrixXd X(sub.n(), d + 1);
    X.leftCols(d) = sub.w;
    X.col(d) = sub.a;
    auto folds = content_folds(sub, config.cv_folds, config.seed);
    CvSelector sel{config.learners, config.cv_folds, CvLoss::log_likelihood};
    qmodel = cv_select(sel, X, sub.y, folds).model;

    Eigen::MatrixXd at = X;
    nu.qa = qmodel.predict(at);
    at.col(d).setOnes();
    nu.q1 = qmodel.predict(at);
    at.col(d).setZero();
    nu.q0 = qmodel.predict(at);
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    nu.qa[k] = clamp_prob(nu.qa[k]);
    nu.q1[k] = clamp_prob(nu.q1[k]);
    nu.q0[k] = clamp_prob(nu.q0[k]);
  }

  if (config.g_known) {
    nu.g1 = Eigen::VectorXd::Constant(m, 0.5);
  } else {
    auto sub = subgroup_rows(data);
    auto folds = content_folds(sub, config.cv_folds, config.seed + 1);
    nu.g1 = cv_predict(config, sub.w, sub.a, folds, sub.w, true, counts.n);
  }
  return nu;
}

struct Fluctuation {
  double epsilon = 0.0;
  bool fell_back = false;  // non-convergence or separation -> epsilon = 0
};

Fluctuation fit_fluctuation(const Eigen::VectorXd& h, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& offset,
                            const Eigen::VectorXd* weights = nullptr) {
  Fluctuation f;
  Eigen::MatrixXd X(h.size(), 1);
  X.col(0) = h;
  try {
    auto fit = fit_logistic(X, y, &offset, weights);
    if (fit.converged) {
      f.epsilon = fit.coef[0];
    } else {
      f.fell_back = true;
    }
  } catch (const std::exception&) {
    f.fell_back = true;
  }
  return f;
}

// symmetric PD solve with a ridge fallback for collinear bases
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                            bool& flagged) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const double tr = std::max(M.trace(), 1e-300);
  Eigen::MatrixXd Mj = M;
  if (es.eigenvalues().minCoeff() < 1e-10 * tr) {
    Mj.diagonal().array() += 1e-8 * tr / static_cast<double>(M.rows());
    flagged = true;
  }
  return Mj.ldlt().solve(b);
}

EstimateReport finish_report(std::string name, double psi, Eigen::VectorXd eic) {
  EstimateReport rep;
  rep.estimator = std::move(name);
  rep.psi_hat = psi;
  rep.eic_values = std::move(eic);
  const auto iv = eic_variance(rep.eic_values, psi);
  rep.se = iv.se;
  rep.ci_low = iv.ci_low;
  rep.ci_high = iv.ci_high;
  rep.diagnostics["eic_mean"] = rep.eic_values.mean();
  rep.diagnostics["degenerate_se"] = iv.degenerate ? 1.0 : 0.0;
  return rep;
}

}  // namespace

double clever_covariate(double a, double g1, double p_s) {
  if (!(g1 > 0.0 && g1 < 1.0)) throw std::invalid_argument("clever_covariate: g1 not in (0,1)");
  if (!(p_s > 0.0 && p_s <= 1.0)) throw std::invalid_argument("clever_covariate: p_s not in (0,1]");
  return (a == 1.0 ? 1.0 / g1 : -1.0 / (1.0 - g1)) / p_s;
}

double closed_form_epsilon(const Eigen::VectorXd& H, const Eigen::VectorXd& R) {
  if (H.size() != R.size()) throw std::invalid_argument("closed_form_epsilon: length mismatch");
  const double h2 = H.squaredNorm();
  if (h2 <= 0.0) throw std::invalid_argument("closed_form_epsilon: degenerate H");
  return H.dot(R) / h2;
}

WaldInterval eic_variance(const Eigen::VectorXd& eic_values, double psi) {
  const auto n = eic_values.size();
  if (n < 2) throw std::invalid_argument("eic_variance: need n >= 2");
  WaldInterval iv;
  const double m2 = eic_values.squaredNorm() / static_cast<double>(n);
  iv.se = std::sqrt(m2 / static_cast<double>(n));
  iv.degenerate = m2 == 0.0;
  iv.ci_low = psi - 1.96 * iv.se;
  iv.ci_high = psi + 1.96 * iv.se;
  return iv;
}

std::vector<int> content_folds(const TrialDataset& data, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("content_folds: need k >= 2");
  const auto n = data.n();
  std::vector<int> folds(static_cast<std::size_t>(n), 0);
  // four (s, a) cells; within a cell order rows by content hash so that the
  // assignment is invariant to row permutation
  for (int cell = 0; cell < 4; ++cell) {
    const double sv = cell / 2;
    const double av = cell % 2;
    std::vector<std::pair<std::uint64_t, Eigen::Index>> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.s[i] == sv && data.a[i] == av)
        members.emplace_back(row_hash(data, i, seed), i);
    std::sort(members.begin(), members.end());
    for (std::size_t r = 0; r < members.size(); ++r)
      folds[static_cast<std::size_t>(members[r].second)] = static_cast<int>(r % static_cast<std::size_t>(k));
  }
  return folds;
}

EstimateReport unadjusted(const TrialDataset& data) {
  validate(data);
  const auto counts = subgroup_counts(data);
  double n11 = 0, n10 = 0, sum1 = 0, sum0 = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.s[i] != 1.0) continue;
    if (data.a[i] == 1.0) {
      n11 += 1;
      sum1 += data.y[i];
    } else {
      n10 += 1;
      sum0 += data.y[i];
    }
  }
  if (n11 == 0 || n10 == 0)
    throw std::runtime_error("unadjusted: empty treatment arm within subgroup");
  const double mu1 = sum1 / n11;
  const double mu0 = sum0 / n10;
  const double psi = mu1 - mu0;
  const double abar = n11 / (n11 + n10);

  Eigen::VectorXd eic = Eigen::VectorXd::Zero(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.s[i] != 1.0) continue;
    const double t = data.a[i] == 1.0 ? (data.y[i] - mu1) / abar
                                      : -(data.y[i] - mu0) / (1.0 - abar);
    eic[i] = t / counts.p_s;
  }
  return finish_report("unadjusted", psi, std::move(eic));
}

EstimateReport aipw_subgroup(const TrialDataset& data, const EstimatorConfig& config) {
  auto nu = fit_subgroup_nuisances(data, config, /*pooled=*/false);
  const auto m = static_cast<Eigen::Index>(nu.rows.size());

  double psi = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    const int i = nu.rows[static_cast<std::size_t>(k)];
    const double h = clever_covariate(data.a[i], nu.g1[k], nu.p_s);
    psi += nu.q1[k] - nu.q0[k] + h * nu.p_s * (data.y[i] - nu.qa[k]);
  }
  psi /= static_cast<double>(m);

  Eigen::VectorXd eic = Eigen::VectorXd::Zero(data.n());
  for (Eigen::Index k = 0; k < m; ++k) {
    const int i = nu.rows[static_cast<std::size_t>(k)];
    const double h = clever_covariate(data.a[i], nu.g1[k], nu.p_s);
    eic[i] = (nu.q1[k] - nu.q0[k] - psi) / nu.p_s + h * (data.y[i] - nu.qa[k]);
  }
  return finish_report("aipw", psi, std::move(eic));
}

EstimateReport tmle_pr(const TrialDataset& data, const EstimatorConfig& config, bool pooled) {
  auto nu = fit_subgroup_nuisances(data, config, pooled);
  const auto m = static_cast<Eigen::Index>(nu.rows.size());

  Eigen::VectorXd ysub(m), h(m), offset(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const int i = nu.rows[static_cast<std::size_t>(k)];
    ysub[k] = data.y[i];
    h[k] = clever_covariate(data.a[i], nu.g1[k], nu.p_s);
    offset[k] = logit(nu.qa[k]);
  }
  const auto fluct = fit_fluctuation(h, ysub, offset);

  double psi = 0.0;
  Eigen::VectorXd qs1(m), qs0(m), qsa(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double h1 = clever_covariate(1.0, nu.g1[k], nu.p_s);
    const double h0 = clever_covariate(0.0, nu.g1[k], nu.p_s);
    qs1[k] = expit(logit(nu.q1[k]) + fluct.epsilon * h1);
    qs0[k] = expit(logit(nu.q0[k]) + fluct.epsilon * h0);
    qsa[k] = expit(logit(nu.qa[k]) + fluct.epsilon * h[k]);
    psi += qs1[k] - qs0[k];
  }
  psi /= static_cast<double>(m);

  Eigen::VectorXd eic = Eigen::VectorXd::Zero(data.n());
  for (Eigen::Index k = 0; k < m; ++k) {
    const int i = nu.rows[static_cast<std::size_t>(k)];
    eic[i] = (qs1[k] - qs0[k] - psi) / nu.p_s + h[k] * (data.y[i] - qsa[k]);
  }
  auto rep = finish_report(pooled ? "tmle_pr" : "tmle", psi, std::move(eic));
  rep.diagnostics["epsilon"] = fluct.epsilon;
  rep.diagnostics["fluctuation_fallback"] = fluct.fell_back ? 1.0 : 0.0;
  return rep;
}

EstimateReport tmle_subgroup(const TrialDataset& data, const EstimatorConfig& config) {
  return tmle_pr(data, config, /*pooled=*/false);
}

std::pair<EstimateReport, AtmleDecomposition> atmle(const TrialDataset& data,
                                                    const EstimatorConfig& config) {
  validate(data, /*require_both_strata=*/true);
  const auto counts = subgroup_counts(data);
  const auto n = data.n();
  const Eigen::Index d = data.dim();
  const double p_s = counts.p_s;
  const double dn = static_cast<double>(n);
  bool ridge_flag = false;
  double pi_fallbacks = 0.0;

  auto folds = content_folds(data, config.cv_folds, config.seed);

  // step 1: gbar and theta
  Eigen::VectorXd gbar;
  if (config.g_known) {
    gbar = Eigen::VectorXd::Constant(n, 0.5);
  } else {
    CvSelector sel{config.learners, config.cv_folds, CvLoss::log_likelihood};
    auto cv = cv_select(sel, data.w, data.a, folds);
    cv.model.trunc_delta = truncation_delta(counts.n);
    gbar = cv.model.predict(data.w);
  }
  Eigen::VectorXd theta;
  {
    CvSelector sel{config.learners, config.cv_folds, CvLoss::log_likelihood};
    theta = cv_select(sel, data.w, data.y, folds).model.predict(data.w);
  }

  // steps 2-4: tau_A working model and its closed-form targeting
  auto tau_a_model = fit_cate_working_model(data.w, data.y, theta, gbar, data.a,
                                            config.hal_screen, config.hal_fit, -1,
                                            stream_seed(config.seed, 0, "hal-a"),
                                            config.cv_folds);
  Eigen::MatrixXd phi_a = tau_a_model.design_at(data.w);
  const Eigen::Index ja = phi_a.cols();

  Eigen::MatrixXd i_a = Eigen::MatrixXd::Zero(ja, ja);
  Eigen::VectorXd s_phi_a = Eigen::VectorXd::Zero(ja);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = gbar[i] * (1.0 - gbar[i]);
    i_a.noalias() += w * phi_a.row(i).transpose() * phi_a.row(i);
    if (data.s[i] == 1.0) s_phi_a += phi_a.row(i).transpose();
  }
  i_a /= dn;
  s_phi_a /= dn * p_s;
  const Eigen::VectorXd c_a = ridge_solve(i_a, s_phi_a, ridge_flag);

  Eigen::VectorXd tau_a = phi_a * tau_a_model.beta;
  Eigen::VectorXd h_a(n), r_a(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double am = data.a[i] - gbar[i];
    h_a[i] = am * phi_a.row(i).dot(c_a);
    r_a[i] = data.y[i] - theta[i] - am * tau_a[i];
  }
  const double eps_a = closed_form_epsilon(h_a, r_a);
  const Eigen::VectorXd beta_a_star = tau_a_model.beta + eps_a * c_a;
  const Eigen::VectorXd tau_a_star = phi_a * beta_a_star;

  // step 5: Pi and Qbar
  Eigen::MatrixXd xwa(n, d + 1);
  xwa.leftCols(d) = data.w;
  xwa.col(d) = data.a;
  Eigen::VectorXd pi_obs0, pibar, qbar;
  FitModel pi_model;
  {
    CvSelector sel{config.learners, config.cv_folds, CvLoss::log_likelihood};
    auto cv_pi = cv_select(sel, xwa, data.s, folds);
    cv_pi.model.trunc_delta = truncation_delta(counts.n);
    pi_model = cv_pi.model;
    pi_obs0 = pi_model.predict(xwa);

    auto cv_pibar = cv_select(sel, data.w, data.s, folds);
    cv_pibar.model.trunc_delta = truncation_delta(counts.n);
    pibar = cv_pibar.model.predict(data.w);

    qbar = cv_select(sel, xwa, data.y, folds).model.predict(xwa);
  }

  // steps 6-7: tau_S working model, with the A column unpenalized
  auto tau_s_model = fit_cate_working_model(xwa, data.y, qbar, pi_obs0, data.s,
                                            config.hal_screen, config.hal_fit,
                                            static_cast<int>(d),
                                            stream_seed(config.seed, 0, "hal-s"),
                                            config.cv_folds);
  Eigen::MatrixXd phi_s_obs = tau_s_model.design_at(xwa);
  Eigen::MatrixXd xw0 = xwa, xw1 = xwa;
  xw0.col(d).setZero();
  xw1.col(d).setOnes();
  Eigen::MatrixXd phi_s0 = tau_s_model.design_at(xw0);
  Eigen::MatrixXd phi_s1 = tau_s_model.design_at(xw1);
  const Eigen::Index js = phi_s_obs.cols();

  Eigen::VectorXd beta_s = tau_s_model.beta;
  const double trunc = truncation_delta(counts.n);
  const double logit_lo = logit(trunc);
  const double logit_hi = logit(1.0 - trunc);
  auto clamp_logit = [&](double v) { return std::min(logit_hi, std::max(logit_lo, v)); };
  Eigen::VectorXd lp_obs(n), lp0(n), lp1(n);
  {
    Eigen::VectorXd p0 = pi_model.predict(xw0);
    Eigen::VectorXd p1 = pi_model.predict(xw1);
    for (Eigen::Index i = 0; i < n; ++i) {
      lp_obs[i] = clamp_logit(logit(pi_obs0[i]));
      lp0[i] = clamp_logit(logit(p0[i]));
      lp1[i] = clamp_logit(logit(p1[i]));
    }
  }

  struct LoopState {
    double psi_tilde, psi_pound, psi, pn_d, sd;
    Eigen::VectorXd eic;
    Eigen::VectorXd eic_pound;
  };

  auto evaluate = [&](const Eigen::VectorXd& bs, const Eigen::VectorXd& lpo,
                      const Eigen::VectorXd& lz, const Eigen::VectorXd& lo) -> LoopState {
    LoopState st;
    Eigen::VectorXd tau_s_obs = phi_s_obs * bs;
    Eigen::VectorXd tau_s0 = phi_s0 * bs;
    Eigen::VectorXd tau_s1 = phi_s1 * bs;
    Eigen::VectorXd pi_obs(n), pi0(n), pi1(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      pi_obs[i] = expit(lpo[i]);
      pi0[i] = expit(lz[i]);
      pi1[i] = expit(lo[i]);
    }

    double psi_tilde = 0.0, psi_pound = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (data.s[i] != 1.0) continue;
      psi_tilde += tau_a_star[i];
      psi_pound += (1.0 - pi0[i]) * tau_s0[i] - (1.0 - pi1[i]) * tau_s1[i];
    }
    psi_tilde /= dn * p_s;
    psi_pound /= dn * p_s;
    st.psi_tilde = psi_tilde;
    st.psi_pound = psi_pound;
    st.psi = psi_tilde - psi_pound;

    Eigen::MatrixXd i_s = Eigen::MatrixXd::Zero(js, js);
    Eigen::VectorXd b_s = Eigen::VectorXd::Zero(js);
    for (Eigen::Index i = 0; i < n; ++i) {
      i_s.noalias() += pi_obs[i] * (1.0 - pi_obs[i]) * phi_s_obs.row(i).transpose() *
                       phi_s_obs.row(i);
      if (data.s[i] == 1.0)
        b_s += (1.0 - pi0[i]) * phi_s0.row(i).transpose() -
               (1.0 - pi1[i]) * phi_s1.row(i).transpose();
    }
    i_s /= dn;
    b_s /= dn * p_s;
    const Eigen::VectorXd c_s = ridge_solve(i_s, b_s, ridge_flag);

    st.eic.resize(n);
    st.eic_pound.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sm = data.s[i] - pi_obs[i];
      const double d_tilde =
          (data.s[i] == 1.0 ? (tau_a_star[i] - psi_tilde) / p_s : 0.0) +
          h_a[i] * (data.y[i] - theta[i] - (data.a[i] - gbar[i]) * tau_a_star[i]);
      const double h_pi = data.a[i] == 1.0 ? tau_s1[i] / gbar[i]
                                           : -tau_s0[i] / (1.0 - gbar[i]);
      const double d_pound =
          (data.s[i] == 1.0
               ? ((1.0 - pi0[i]) * tau_s0[i] - (1.0 - pi1[i]) * tau_s1[i] - psi_pound) / p_s
               : 0.0) +
          pibar[i] / p_s * h_pi * sm +
          sm * phi_s_obs.row(i).dot(c_s) * (data.y[i] - qbar[i] - sm * tau_s_obs[i]);
      st.eic[i] = d_tilde - d_pound;
      st.eic_pound[i] = d_pound;
    }
    st.pn_d = st.eic.mean();
    st.sd = std::sqrt(std::max(0.0, st.eic.squaredNorm() / dn - st.pn_d * st.pn_d));
    return st;
  };

  LoopState st = evaluate(beta_s, lp_obs, lp0, lp1);
  int iter = 0;
  bool loop_converged = true;
  for (;; ++iter) {
    const double s_n = st.sd / (std::sqrt(dn) * std::log(dn));
    if (std::abs(st.pn_d) <= s_n) break;
    if (iter >= config.atmle_loop_cap) {
      loop_converged = false;
      break;
    }
    // step 10: Pi fluctuation
    Eigen::VectorXd tau_s0 = phi_s0 * beta_s;
    Eigen::VectorXd tau_s1 = phi_s1 * beta_s;
    Eigen::VectorXd h(n), wts(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      h[i] = data.a[i] == 1.0 ? tau_s1[i] / gbar[i] : -tau_s0[i] / (1.0 - gbar[i]);
      wts[i] = pibar[i] / p_s;
    }
    auto fluct = fit_fluctuation(h, data.s, lp_obs, &wts);
    if (fluct.fell_back) pi_fallbacks += 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      lp_obs[i] = clamp_logit(lp_obs[i] + fluct.epsilon * h[i]);
      lp0[i] = clamp_logit(lp0[i] - fluct.epsilon * tau_s0[i] / (1.0 - gbar[i]));
      lp1[i] = clamp_logit(lp1[i] + fluct.epsilon * tau_s1[i] / gbar[i]);
    }
    // step 11: gamma* update of beta_S at the refreshed Pi
    Eigen::VectorXd pi_obs(n), pi0(n), pi1(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      pi_obs[i] = expit(lp_obs[i]);
      pi0[i] = expit(lp0[i]);
      pi1[i] = expit(lp1[i]);
    }
    Eigen::MatrixXd i_s = Eigen::MatrixXd::Zero(js, js);
    Eigen::VectorXd b_s = Eigen::VectorXd::Zero(js);
    for (Eigen::Index i = 0; i < n; ++i) {
      i_s.noalias() += pi_obs[i] * (1.0 - pi_obs[i]) * phi_s_obs.row(i).transpose() *
                       phi_s_obs.row(i);
      if (data.s[i] == 1.0)
        b_s += (1.0 - pi0[i]) * phi_s0.row(i).transpose() -
               (1.0 - pi1[i]) * phi_s1.row(i).transpose();
    }
    i_s /= dn;
    b_s /= dn * p_s;
    const Eigen::VectorXd c_s = ridge_solve(i_s, b_s, ridge_flag);
    Eigen::VectorXd tau_s_obs = phi_s_obs * beta_s;
    Eigen::VectorXd h_s(n), r_s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sm = data.s[i] - pi_obs[i];
      h_s[i] = sm * phi_s_obs.row(i).dot(c_s);
      r_s[i] = data.y[i] - qbar[i] - sm * tau_s_obs[i];
    }
    if (h_s.squaredNorm() > 0.0) {
      const double gamma = closed_form_epsilon(h_s, r_s);
      beta_s += gamma * c_s;
    }
    st = evaluate(beta_s, lp_obs, lp0, lp1);
  }

  AtmleDecomposition dec;
  dec.psi_tilde = st.psi_tilde;
  dec.psi_pound = st.psi_pound;
  dec.psi = st.psi_tilde - st.psi_pound;

  auto rep = finish_report("atmle", dec.psi, std::move(st.eic));
  rep.diagnostics["iterations"] = static_cast<double>(iter);
  rep.diagnostics["loop_converged"] = loop_converged ? 1.0 : 0.0;
  rep.diagnostics["epsilon_a"] = eps_a;
  rep.diagnostics["ridge_stabilized"] = ridge_flag ? 1.0 : 0.0;
  rep.diagnostics["pi_fluctuation_fallbacks"] = pi_fallbacks;
  rep.diagnostics["psi_tilde"] = dec.psi_tilde;
  rep.diagnostics["psi_pound"] = dec.psi_pound;
  rep.diagnostics["tau_a_cols"] = static_cast<double>(ja);
  rep.diagnostics["tau_s_cols"] = static_cast<double>(js);
  {
    const double m = st.eic_pound.mean();
    const double var = st.eic_pound.squaredNorm() / dn - m * m;
    rep.diagnostics["se_pound"] = std::sqrt(std::max(0.0, var) / dn);
  }
  return {std::move(rep), dec};
}

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names{"unadjusted", "aipw", "tmle", "tmle_pr",
                                              "atmle"};
  return names;
}

EstimateReport run_estimator(const std::string& name, const TrialDataset& data,
                             const EstimatorConfig& config) {
  if (name == "unadjusted") return unadjusted(data);
  if (name == "aipw") return aipw_subgroup(data, config);
  if (name == "tmle") return tmle_subgroup(data, config);
  if (name == "tmle_pr") return tmle_pr(data, config);
  if (name == "atmle") return atmle(data, config).first;
  throw std::invalid_argument("unknown estimator: " + name);
}

}  // namespace sgtmle
