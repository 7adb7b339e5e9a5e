#pragma once

#include "sgtmle/trial_data.hpp"

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sgtmle {

struct Marginal {
  std::string name;
  bool binary = false;
  double prevalence = 0.5;                // binary only
  std::array<double, 5> quantiles{};      // continuous: min, Q1, median, Q3, max
};

struct CopulaSpec {
  std::vector<Marginal> marginals;
  Eigen::MatrixXd correlation;  // unit diagonal, positive definite

  void check() const;
  int index_of(const std::string& name) const;  // -1 when absent
  Eigen::Index dim() const { return static_cast<Eigen::Index>(marginals.size()); }
};

// LEADER-style defaults: 7 continuous covariates (age, diabetes duration,
// eGFR, BMI, HbA1c, LDL, HDL) and 4 binary (SEX, INSNVFL, ANTIHYP, PRCVFL)
// with mild correlation blocks.
CopulaSpec default_copula();

// piecewise-linear inverse CDF through the five quantile points at
// probabilities 0, 0.25, 0.5, 0.75, 1
double inverse_cdf(const std::array<double, 5>& quantiles, double u);

Eigen::MatrixXd sample_covariates(Eigen::Index n, const CopulaSpec& copula,
                                  std::mt19937_64& rng);

enum class SubgroupKind { bmi_only, strong_prediction };

struct SubgroupModel {
  SubgroupKind kind = SubgroupKind::bmi_only;
  double alpha0 = 0.0;
  double alpha1 = -1.131383;  // bmi-only slope on standardized BMI
};

// z = (x - median) / ((Q3 - Q1) / 1.349) for continuous covariates
double z_score(const Marginal& marginal, double x);

// linear predictor excluding the intercept alpha0
Eigen::VectorXd subgroup_linear_predictor(const Eigen::MatrixXd& w, const CopulaSpec& copula,
                                          const SubgroupModel& model);

Eigen::VectorXd sample_subgroup(const Eigen::MatrixXd& w, const CopulaSpec& copula,
                                const SubgroupModel& model, std::mt19937_64& rng);

// Monotone bisection on alpha0 so the Monte Carlo subgroup prevalence matches
// the target to 1e-4, on an n_mc covariate sample.
double calibrate_alpha0(const SubgroupModel& model, const CopulaSpec& copula, double target,
                        std::uint64_t seed, long n_mc = 1000000);

struct ScenarioSpec {
  int scenario = 1;
  double nu = 1.5;       // Weibull shape
  double eta = 0.0;      // scale; 0 means not yet calibrated
  Eigen::VectorXd beta_w;  // l(W) coefficients on centered/scaled covariates
  double beta_a = 0.0;
  double beta_as = 0.0;
  // scenario 3 piecewise coefficients
  double t0 = 1.5;
  double beta_a1 = 0.0, beta_a2 = 0.0;
  double beta_as1 = 0.0, beta_as2 = 0.0;
  double tau_horizon = 3.8;
  double target_pooled_risk = 1302.0 / 9340.0;
};

// Scenario coefficients per the published designs, with the default modest
// prognostic score beta_w
ScenarioSpec default_scenario(int scenario, const CopulaSpec& copula);

// covariate centering used in the prognostic scores (age 64/10, duration
// 11.5/10, eGFR 84.3/20, BMI 31.7/10, HbA1c 8.3/2, LDL -2.20; binary raw;
// other continuous covariates fall back to median/IQR scaling)
double centered_value(const Marginal& marginal, double x);

double linear_score(const ScenarioSpec& spec, const CopulaSpec& copula,
                    const Eigen::RowVectorXd& w);  // l(W)
double nonlinear_score(const CopulaSpec& copula, const Eigen::RowVectorXd& w);  // h(W)

// log-relative hazard f(s, a, W); `late` selects the post-t0 piece (scenario 3)
double log_relative_hazard(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                           double a, const Eigen::RowVectorXd& w, bool late = false);

double cumulative_hazard(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                         double a, const Eigen::RowVectorXd& w, double t);

// F(t | s, a, w) = 1 - exp(-Lambda(t))
double conditional_risk(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                        double a, const Eigen::RowVectorXd& w, double t);

double sample_event_time(const ScenarioSpec& spec, const CopulaSpec& copula, double s,
                         double a, const Eigen::RowVectorXd& w, std::mt19937_64& rng);

// tau_{S,0}(W, a) = F(tau | 1, a, w) - F(tau | 0, a, w)
double bias_function(const ScenarioSpec& spec, const CopulaSpec& copula,
                     const Eigen::RowVectorXd& w, double a);

// Bisection on eta until the Monte Carlo pooled event risk under 1:1
// randomization matches spec.target_pooled_risk to 5e-4; sets spec.eta.
double calibrate_eta(ScenarioSpec& spec, const CopulaSpec& copula,
                     const SubgroupModel& model, std::uint64_t seed, long n_mc = 1000000);

struct TruthResult {
  double psi_true = 0.0;
  double mc_se = 0.0;
  long n_s1 = 0;  // subgroup draws used
};

// psi_true = E[F(tau|1,1,W) - F(tau|1,0,W) | S=1] by Monte Carlo integration;
// errors when fewer than 1e4 subgroup draws land in the sample
TruthResult compute_truth(const ScenarioSpec& spec, const CopulaSpec& copula,
                          const SubgroupModel& model, long n_mc, std::uint64_t seed);

// One trial replication: W from the copula, S from the subgroup model,
// A ~ Bernoulli(1/2), Y = I(T <= tau)
TrialDataset simulate(const ScenarioSpec& spec, const CopulaSpec& copula,
                      const SubgroupModel& model, Eigen::Index n,
                      std::uint64_t master_seed, std::uint64_t replication);

}  // namespace sgtmle
