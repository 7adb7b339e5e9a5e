#include "sgtmle/dgp.hpp"

#include "sgtmle/glm.hpp"
#include "sgtmle/rng.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sgtmle {

namespace {

constexpr long kChunk = 100000;  // Monte Carlo draws per block during calibration

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

void CopulaSpec::check() const {
  const auto d = dim();
  if (d == 0) throw std::invalid_argument("CopulaSpec: no marginals");
  if (correlation.rows() != d || correlation.cols() != d)
    throw std::invalid_argument("CopulaSpec: correlation dimension mismatch");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (correlation(i, i) != 1.0)
      throw std::invalid_argument("CopulaSpec: correlation diagonal must be 1");
    for (Eigen::Index j = 0; j < d; ++j)
      if (correlation(i, j) != correlation(j, i))
        throw std::invalid_argument("CopulaSpec: correlation must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(correlation);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("CopulaSpec: correlation not positive definite");
  for (const auto& m : marginals) {
    if (m.binary) {
      if (!(m.prevalence > 0.0 && m.prevalence < 1.0))
        throw std::invalid_argument("CopulaSpec: prevalence of " + m.name + " not in (0,1)");
    } else {
      for (int k = 1; k < 5; ++k)
        if (m.quantiles[static_cast<std::size_t>(k)] < m.quantiles[static_cast<std::size_t>(k - 1)])
          throw std::invalid_argument("CopulaSpec: quantiles of " + m.name + " decrease");
    }
  }
}

int CopulaSpec::index_of(const std::string& name) const {
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  const std::string key = lower(name);
  for (std::size_t j = 0; j < marginals.size(); ++j)
    if (lower(marginals[j].name) == key) return static_cast<int>(j);
  return -1;
}

CopulaSpec default_copula() {
  CopulaSpec c;
  auto cont = [](std::string name, std::array<double, 5> q) {
    Marginal m;
    m.name = std::move(name);
    m.quantiles = q;
    return m;
  };
  auto bin = [](std::string name, double p) {
    Marginal m;
    m.name = std::move(name);
    m.binary = true;
    m.prevalence = p;
    return m;
  };
  c.marginals = {
      cont("AGE", {50.0, 57.0, 64.0, 70.0, 85.0}),
      cont("DURATION", {0.1, 6.0, 11.5, 17.0, 40.0}),
      cont("EGFR", {15.0, 66.0, 84.3, 102.0, 160.0}),
      cont("BMI", {17.0, 27.2, 31.7, 36.2, 60.0}),
      cont("HBA1C", {5.5, 7.5, 8.3, 9.6, 14.0}),
      cont("LDL", {0.4, 1.6, 2.2, 2.9, 7.0}),
      cont("HDL", {0.5, 0.95, 1.15, 1.40, 3.2}),
      bin("SEX", 0.357),
      bin("INSNVFL", 0.55),
      bin("ANTIHYP", 0.92),
      bin("PRCVFL", 0.81),
  };
  const auto d = c.dim();
  c.correlation = Eigen::MatrixXd::Identity(d, d);
  auto set = [&](const char* a, const char* b, double rho) {
    const int i = c.index_of(a);
    const int j = c.index_of(b);
    c.correlation(i, j) = rho;
    c.correlation(j, i) = rho;
  };
  set("AGE", "DURATION", 0.25);
  set("AGE", "EGFR", -0.30);
  set("AGE", "PRCVFL", 0.20);
  set("BMI", "HBA1C", 0.10);
  set("BMI", "HDL", -0.20);
  set("LDL", "HDL", 0.15);
  set("DURATION", "INSNVFL", -0.30);
  c.check();
  return c;
}

double inverse_cdf(const std::array<double, 5>& quantiles, double u) {
  u = std::min(1.0, std::max(0.0, u));
  const int seg = std::min(3, static_cast<int>(u * 4.0));
  const double p_lo = 0.25 * seg;
  const double frac = (u - p_lo) / 0.25;
  return quantiles[static_cast<std::size_t>(seg)] +
         frac * (quantiles[static_cast<std::size_t>(seg + 1)] -
                 quantiles[static_cast<std::size_t>(seg)]);
}

Eigen::MatrixXd sample_covariates(Eigen::Index n, const CopulaSpec& copula,
                                  std::mt19937_64& rng) {
  copula.check();
  const auto d = copula.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(copula.correlation);
  const Eigen::MatrixXd chol = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd w(n, d);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(rng);
    const Eigen::VectorXd zc = chol * z;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double u = normal_cdf(zc[j]);
      const auto& m = copula.marginals[static_cast<std::size_t>(j)];
      w(i, j) = m.binary ? (u < m.prevalence ? 1.0 : 0.0) : inverse_cdf(m.quantiles, u);
    }
  }
  return w;
}

double z_score(const Marginal& marginal, double x) {
  if (marginal.binary) return x;
  const double med = marginal.quantiles[2];
  const double scale = (marginal.quantiles[3] - marginal.quantiles[1]) / 1.349;
  if (scale <= 0.0) throw std::invalid_argument("z_score: zero IQR for " + marginal.name);
  return (x - med) / scale;
}

Eigen::VectorXd subgroup_linear_predictor(const Eigen::MatrixXd& w, const CopulaSpec& copula,
                                          const SubgroupModel& model) {
  auto col = [&](const char* name) {
    const int j = copula.index_of(name);
    if (j < 0) throw std::invalid_argument(std::string("subgroup model needs covariate ") + name);
    return j;
  };
  const auto n = w.rows();
  Eigen::VectorXd lp(n);
  if (model.kind == SubgroupKind::bmi_only) {
    const int jb = col("BMI");
    const auto& mb = copula.marginals[static_cast<std::size_t>(jb)];
    for (Eigen::Index i = 0; i < n; ++i) lp[i] = model.alpha1 * z_score(mb, w(i, jb));
  } else {
    const int jb = col("BMI");
    const int ja = col("AGE");
    const int je = col("EGFR");
    const int js = col("SEX");
    const int ji = col("INSNVFL");
    const int jp = col("PRCVFL");
    const auto& mb = copula.marginals[static_cast<std::size_t>(jb)];
    const auto& ma = copula.marginals[static_cast<std::size_t>(ja)];
    const auto& me = copula.marginals[static_cast<std::size_t>(je)];
    for (Eigen::Index i = 0; i < n; ++i)
      lp[i] = -5.0 * z_score(mb, w(i, jb)) + 3.0 * z_score(ma, w(i, ja)) +
              2.0 * z_score(me, w(i, je)) + 1.5 * w(i, js) + 1.5 * w(i, ji) -
              2.0 * w(i, jp);
  }
  return lp;
}

Eigen::VectorXd sample_subgroup(const Eigen::MatrixXd& w, const CopulaSpec& copula,
                                const SubgroupModel& model, std::mt19937_64& rng) {
  const auto lp = subgroup_linear_predictor(w, copula, model);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd s(w.rows());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    s[i] = unif(rng) < expit(model.alpha0 + lp[i]) ? 1.0 : 0.0;
  return s;
}

double calibrate_alpha0(const SubgroupModel& model, const CopulaSpec& copula, double target,
                        std::uint64_t seed, long n_mc) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("calibrate_alpha0: target outside (0,1)");
  // one fixed Monte Carlo covariate sample; prevalence(alpha0) is then a
  // deterministic strictly increasing function
  std::vector<double> lp;
  lp.reserve(static_cast<std::size_t>(n_mc));
  auto rng = make_rng(seed, 0, "calibrate-alpha0");
  for (long done = 0; done < n_mc; done += kChunk) {
    const auto m = static_cast<Eigen::Index>(std::min(kChunk, n_mc - done));
    const auto w = sample_covariates(m, copula, rng);
    const auto v = subgroup_linear_predictor(w, copula, model);
    for (Eigen::Index i = 0; i < m; ++i) lp.push_back(v[i]);
  }
  auto prevalence = [&](double a0) {
    double total = 0.0;
    for (double v : lp) total += expit(a0 + v);
    return total / static_cast<double>(lp.size());
  };
  double lo = -30.0, hi = 30.0;
  if (prevalence(lo) > target || prevalence(hi) < target)
    throw std::runtime_error("calibrate_alpha0: target outside bracket");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double p = prevalence(mid);
    if (std::abs(p - target) <= 1e-4) return mid;
    (p < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ScenarioSpec default_scenario(int scenario, const CopulaSpec& copula) {
  if (scenario < 1 || scenario > 3)
    throw std::invalid_argument("default_scenario: scenario must be 1, 2, or 3");
  ScenarioSpec spec;
  spec.scenario = scenario;
  spec.beta_a = std::log(0.95);
  spec.beta_as = std::log(0.55) - std::log(0.95);
  spec.beta_a1 = std::log(0.98);
  spec.beta_a2 = std::log(0.90);
  spec.beta_as1 = std::log(0.70) - std::log(0.98);
  spec.beta_as2 = std::log(0.45) - std::log(0.90);
  spec.beta_w = Eigen::VectorXd::Zero(copula.dim());
  auto set = [&](const char* name, double b) {
    const int j = copula.index_of(name);
    if (j >= 0) spec.beta_w[j] = b;
  };
  set("AGE", 0.75);
  set("DURATION", 0.30);
  set("EGFR", -0.60);
  set("BMI", 0.15);
  set("HBA1C", 0.45);
  set("LDL", 0.30);
  set("HDL", -0.30);
  set("SEX", -0.30);
  set("INSNVFL", -0.30);
  set("ANTIHYP", 0.30);
  set("PRCVFL", 0.90);
  return spec;
}

double centered_value(const Marginal& marginal, double x) {
  if (marginal.binary) return x;
  if (marginal.name == "AGE") return (x - 64.0) / 10.0;
  if (marginal.name == "DURATION") return (x - 11.5) / 10.0;
  if (marginal.name == "EGFR") return (x - 84.3) / 20.0;
  if (marginal.name == "BMI") return (x - 31.7) / 10.0;
  if (marginal.name == "HBA1C") return (x - 8.3) / 2.0;
  if (marginal.name == "LDL") return x - 2.20;
  return z_score(marginal, x);
}

double linear_score(const ScenarioSpec& spec, const CopulaSpec& copula,
                    const Eigen::RowVectorXd& w) {
  if (spec.beta_w.size() != copula.dim())
    throw std::invalid_argument("linear_score: beta_w dimension mismatch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < copula.dim(); ++j)
    total += spec.beta_w[j] * centered_value(copula.marginals[static_cast<std::size_t>(j)], w[j]);
  return total;
}

double nonlinear_score(const CopulaSpec& copula, const Eigen::RowVectorXd& w) {
  auto cv = [&](const char* name) {
    const int j = copula.index_of(name);
    if (j < 0) throw std::invalid_argument(std::string("nonlinear_score needs covariate ") + name);
    return centered_value(copula.marginals[static_cast<std::size_t>(j)], w[j]);
  };
  const double age_c = cv("AGE");
  const double dur_c = cv("DURATION");
  const double egfr_c = cv("EGFR");
  const double bmi_c = cv("BMI");
  const double hba1c_c = cv("HBA1C");
  const double ldl_c = cv("LDL");
  const double prcvfl = cv("PRCVFL");
  const double insnvfl = cv("INSNVFL");
  return 0.08 * age_c * age_c + 0.06 * dur_c + 0.08 * std::sin(std::numbers::pi * hba1c_c) +
         0.06 * ldl_c * egfr_c + 0.05 * bmi_c * bmi_c + 0.08 * prcvfl + 0.06 * insnvfl;
}

double log_relative_hazard(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                           double a, const Eigen::RowVectorXd& w, bool late) {
  const double ell = linear_score(spec, copula, w);
  switch (spec.scenario) {
    case 1:
      return ell + a * (spec.beta_a + spec.beta_as * s);
    case 2:
      return ell + 2.5 * (nonlinear_score(copula, w) + 0.04 * s) +
             a * (spec.beta_a + spec.beta_as * s);
    case 3: {
      const double base = ell + 2.5 * (nonlinear_score(copula, w) + 0.04 * s);
      return late ? base + a * (spec.beta_a2 + spec.beta_as2 * s)
                  : base + a * (spec.beta_a1 + spec.beta_as1 * s);
    }
    default:
      throw std::invalid_argument("log_relative_hazard: unknown scenario");
  }
}

double cumulative_hazard(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                         double a, const Eigen::RowVectorXd& w, double t) {
  if (t <= 0.0) return 0.0;
  if (spec.eta <= 0.0) throw std::invalid_argument("cumulative_hazard: eta not calibrated");
  if (spec.scenario != 3)
    return spec.eta * std::pow(t, spec.nu) *
           std::exp(log_relative_hazard(spec, copula, s, a, w));
  const double f1 = std::exp(log_relative_hazard(spec, copula, s, a, w, false));
  if (t < spec.t0) return spec.eta * std::pow(t, spec.nu) * f1;
  const double f2 = std::exp(log_relative_hazard(spec, copula, s, a, w, true));
  const double t0nu = std::pow(spec.t0, spec.nu);
  return spec.eta * (t0nu * f1 + (std::pow(t, spec.nu) - t0nu) * f2);
}

double conditional_risk(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                        double a, const Eigen::RowVectorXd& w, double t) {
  return -std::expm1(-cumulative_hazard(spec, copula, s, a, w, t));
}

double sample_event_time(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                         double a, const Eigen::RowVectorXd& w, std::mt19937_64& rng) {
  if (spec.eta <= 0.0) throw std::invalid_argument("sample_event_time: eta not calibrated");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double h = -std::log(1.0 - unif(rng));  // target cumulative hazard
  if (spec.scenario != 3) {
    const double rate = spec.eta * std::exp(log_relative_hazard(spec, copula, s, a, w));
    return std::pow(h / rate, 1.0 / spec.nu);
  }
  const double f1 = std::exp(log_relative_hazard(spec, copula, s, a, w, false));
  const double t0nu = std::pow(spec.t0, spec.nu);
  const double h_at_t0 = spec.eta * t0nu * f1;
  if (h <= h_at_t0) return std::pow(h / (spec.eta * f1), 1.0 / spec.nu);
  const double f2 = std::exp(log_relative_hazard(spec, copula, s, a, w, true));
  return std::pow(t0nu + (h - h_at_t0) / (spec.eta * f2), 1.0 / spec.nu);
}

double bias_function(const ScenarioSpec& spec, const CopulaSpec& copula,
                     const Eigen::RowVectorXd& w, double a) {
  return conditional_risk(spec, copula, 1.0, a, w, spec.tau_horizon) -
         conditional_risk(spec, copula, 0.0, a, w, spec.tau_horizon);
}

double calibrate_eta(ScenarioSpec& spec, const CopulaSpec& copula,
                     const SubgroupModel& model, std::uint64_t seed, long n_mc) {
  // Lambda is linear in eta in every scenario, so precompute the per-draw,
  // per-arm cumulative-hazard factors once
  std::vector<double> c0, c1;
  c0.reserve(static_cast<std::size_t>(n_mc));
  c1.reserve(static_cast<std::size_t>(n_mc));
  ScenarioSpec unit = spec;
  unit.eta = 1.0;
  auto rng = make_rng(seed, 0, "calibrate-eta");
  auto rng_s = make_rng(seed, 0, "calibrate-eta-subgroup");
  for (long done = 0; done < n_mc; done += kChunk) {
    const auto m = static_cast<Eigen::Index>(std::min(kChunk, n_mc - done));
    const auto w = sample_covariates(m, copula, rng);
    const auto s = sample_subgroup(w, copula, model, rng_s);
    for (Eigen::Index i = 0; i < m; ++i) {
      c0.push_back(cumulative_hazard(unit, copula, s[i], 0.0, w.row(i), spec.tau_horizon));
      c1.push_back(cumulative_hazard(unit, copula, s[i], 1.0, w.row(i), spec.tau_horizon));
    }
  }
  auto pooled_risk = [&](double eta) {
    double total = 0.0;
    for (std::size_t i = 0; i < c0.size(); ++i)
      total += 0.5 * (-std::expm1(-eta * c0[i])) + 0.5 * (-std::expm1(-eta * c1[i]));
    return total / static_cast<double>(c0.size());
  };
  double lo = 1e-10, hi = 1.0;
  while (pooled_risk(hi) < spec.target_pooled_risk) {
    hi *= 2.0;
    if (hi > 1e6) throw std::runtime_error("calibrate_eta: bracket failure");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = pooled_risk(mid);
    if (std::abs(r - spec.target_pooled_risk) <= 5e-4) {
      spec.eta = mid;
      return mid;
    }
    (r < spec.target_pooled_risk ? lo : hi) = mid;
  }
  spec.eta = 0.5 * (lo + hi);
  return spec.eta;
}

TruthResult compute_truth(const ScenarioSpec& spec, const CopulaSpec& copula,
                          const SubgroupModel& model, long n_mc, std::uint64_t seed) {
  if (n_mc < 100000) throw std::invalid_argument("compute_truth: n_mc must be >= 1e5");
  auto rng = make_rng(seed, 0, "truth-covariates");
  auto rng_s = make_rng(seed, 0, "truth-subgroup");
  double sum = 0.0, sumsq = 0.0;
  long n1 = 0;
  for (long done = 0; done < n_mc; done += kChunk) {
    const auto m = static_cast<Eigen::Index>(std::min(kChunk, n_mc - done));
    const auto w = sample_covariates(m, copula, rng);
    const auto s = sample_subgroup(w, copula, model, rng_s);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s[i] != 1.0) continue;
      const double tau = conditional_risk(spec, copula, 1.0, 1.0, w.row(i), spec.tau_horizon) -
                         conditional_risk(spec, copula, 1.0, 0.0, w.row(i), spec.tau_horizon);
      sum += tau;
      sumsq += tau * tau;
      ++n1;
    }
  }
  if (n1 < 10000)
    throw std::runtime_error("compute_truth: fewer than 1e4 subgroup draws; increase n_mc");
  TruthResult res;
  res.n_s1 = n1;
  res.psi_true = sum / static_cast<double>(n1);
  const double var = sumsq / static_cast<double>(n1) - res.psi_true * res.psi_true;
  res.mc_se = std::sqrt(std::max(0.0, var) / static_cast<double>(n1));
  return res;
}

TrialDataset simulate(const ScenarioSpec& spec, const CopulaSpec& copula,
                      const SubgroupModel& model, Eigen::Index n,
                      std::uint64_t master_seed, std::uint64_t replication) {
  if (n < 20) throw std::invalid_argument("simulate: n must be >= 20");
  TrialDataset data;
  auto rng_w = make_rng(master_seed, replication, "covariates");
  data.w = sample_covariates(n, copula, rng_w);
  auto rng_s = make_rng(master_seed, replication, "subgroup");
  data.s = sample_subgroup(data.w, copula, model, rng_s);

  auto rng_a = make_rng(master_seed, replication, "treatment");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  data.a.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) data.a[i] = unif(rng_a) < 0.5 ? 1.0 : 0.0;

  auto rng_t = make_rng(master_seed, replication, "event");
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = sample_event_time(spec, copula, data.s[i], data.a[i], data.w.row(i), rng_t);
    data.y[i] = t <= spec.tau_horizon ? 1.0 : 0.0;
  }
  for (const auto& m : copula.marginals) data.covariate_names.push_back(m.name);
  return data;
}

}  // namespace sgtmle
