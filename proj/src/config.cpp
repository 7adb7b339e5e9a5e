#include "sgtmle/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sgtmle {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::vector<std::string>& allowed,
                 const std::string& path) {
  if (!j.is_object()) throw std::runtime_error("config: " + path + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw std::runtime_error("config: unknown key " + path + "." + it.key());
  }
}

std::string subgroup_kind_to_string(SubgroupKind kind) {
  return kind == SubgroupKind::bmi_only ? "bmi_only" : "strong_prediction";
}

SubgroupKind subgroup_kind_from_string(const std::string& s) {
  if (s == "bmi_only") return SubgroupKind::bmi_only;
  if (s == "strong_prediction") return SubgroupKind::strong_prediction;
  throw std::runtime_error("config: unknown subgroup.kind " + s);
}

json copula_to_json(const CopulaSpec& c) {
  json out;
  out["marginals"] = json::array();
  for (const auto& m : c.marginals) {
    json jm;
    jm["name"] = m.name;
    if (m.binary)
      jm["prevalence"] = m.prevalence;
    else
      jm["quantiles"] = m.quantiles;
    out["marginals"].push_back(jm);
  }
  out["correlation"] = json::array();
  for (Eigen::Index i = 0; i < c.correlation.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < c.correlation.cols(); ++j)
      row.push_back(c.correlation(i, j));
    out["correlation"].push_back(row);
  }
  return out;
}

CopulaSpec copula_from_json(const json& j) {
  expect_keys(j, {"marginals", "correlation"}, "dgp.copula");
  CopulaSpec c;
  for (const auto& jm : j.at("marginals")) {
    expect_keys(jm, {"name", "prevalence", "quantiles"}, "dgp.copula.marginals[]");
    Marginal m;
    m.name = jm.at("name").get<std::string>();
    if (jm.contains("prevalence")) {
      m.binary = true;
      m.prevalence = jm.at("prevalence").get<double>();
    } else {
      m.quantiles = jm.at("quantiles").get<std::array<double, 5>>();
    }
    c.marginals.push_back(std::move(m));
  }
  const auto d = c.dim();
  c.correlation.resize(d, d);
  const auto& rows = j.at("correlation");
  if (static_cast<Eigen::Index>(rows.size()) != d)
    throw std::runtime_error("config: dgp.copula.correlation has wrong row count");
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != d)
      throw std::runtime_error("config: dgp.copula.correlation has wrong column count");
    for (Eigen::Index k = 0; k < d; ++k)
      c.correlation(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  c.check();
  return c;
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  cfg.copula = default_copula();
  cfg.scenario_spec = default_scenario(1, cfg.copula);
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  json dgp;
  dgp["scenario"] = cfg.scenario;
  dgp["nu"] = cfg.scenario_spec.nu;
  dgp["eta"] = cfg.scenario_spec.eta;
  dgp["tau_horizon"] = cfg.scenario_spec.tau_horizon;
  dgp["target_pooled_risk"] = cfg.scenario_spec.target_pooled_risk;
  dgp["beta_a"] = cfg.scenario_spec.beta_a;
  dgp["beta_as"] = cfg.scenario_spec.beta_as;
  dgp["t0"] = cfg.scenario_spec.t0;
  dgp["beta_a1"] = cfg.scenario_spec.beta_a1;
  dgp["beta_a2"] = cfg.scenario_spec.beta_a2;
  dgp["beta_as1"] = cfg.scenario_spec.beta_as1;
  dgp["beta_as2"] = cfg.scenario_spec.beta_as2;
  dgp["calibration_mc"] = cfg.calibration_mc;
  json bw;
  for (std::size_t k = 0; k < cfg.copula.marginals.size(); ++k)
    bw[cfg.copula.marginals[k].name] = cfg.scenario_spec.beta_w[static_cast<Eigen::Index>(k)];
  dgp["beta_w"] = bw;
  dgp["copula"] = copula_to_json(cfg.copula);
  j["dgp"] = dgp;

  json sg;
  sg["kind"] = subgroup_kind_to_string(cfg.subgroup.kind);
  sg["alpha1"] = cfg.subgroup.alpha1;
  if (cfg.alpha0)
    sg["alpha0"] = *cfg.alpha0;
  else
    sg["alpha0"] = nullptr;
  sg["target_prevalence"] = cfg.target_prevalence;
  j["subgroup"] = sg;

  json hal;
  hal["screen"] = {{"max_degree", cfg.hal_screen.max_degree},
                   {"smoothness", cfg.hal_screen.smoothness},
                   {"num_knots", cfg.hal_screen.num_knots}};
  hal["fit"] = {{"max_degree", cfg.hal_fit.max_degree},
                {"smoothness", cfg.hal_fit.smoothness},
                {"num_knots", cfg.hal_fit.num_knots}};
  j["hal"] = hal;

  json lrn;
  lrn["candidates"] = json::array();
  for (auto k : cfg.learners) lrn["candidates"].push_back(learner_to_string(k));
  lrn["cv_folds"] = cfg.cv_folds;
  j["learners"] = lrn;

  json est;
  est["list"] = cfg.estimators;
  est["g_known"] = cfg.g_known;
  est["loop_cap"] = cfg.atmle_loop_cap;
  est["seed"] = cfg.seed;
  j["estimators"] = est;

  json bench;
  bench["n"] = cfg.bench_n;
  bench["reps"] = cfg.bench_reps;
  bench["truth_mc"] = cfg.truth_mc;
  j["bench"] = bench;

  return j.dump(2);
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: invalid JSON: ") + e.what());
  }
  expect_keys(j, {"dgp", "subgroup", "hal", "learners", "estimators", "bench"}, "$");

  RunConfig cfg = default_config();

  if (j.contains("dgp")) {
    const auto& dgp = j["dgp"];
    expect_keys(dgp,
                {"scenario", "nu", "eta", "tau_horizon", "target_pooled_risk", "beta_a",
                 "beta_as", "t0", "beta_a1", "beta_a2", "beta_as1", "beta_as2", "beta_w",
                 "copula", "calibration_mc"},
                "dgp");
    if (dgp.contains("copula")) cfg.copula = copula_from_json(dgp["copula"]);
    if (dgp.contains("scenario")) cfg.scenario = dgp["scenario"].get<int>();
    cfg.scenario_spec = default_scenario(cfg.scenario, cfg.copula);
    auto maybe = [&](const char* key, double& target) {
      if (dgp.contains(key)) target = dgp[key].get<double>();
    };
    maybe("nu", cfg.scenario_spec.nu);
    maybe("eta", cfg.scenario_spec.eta);
    maybe("tau_horizon", cfg.scenario_spec.tau_horizon);
    maybe("target_pooled_risk", cfg.scenario_spec.target_pooled_risk);
    maybe("beta_a", cfg.scenario_spec.beta_a);
    maybe("beta_as", cfg.scenario_spec.beta_as);
    maybe("t0", cfg.scenario_spec.t0);
    maybe("beta_a1", cfg.scenario_spec.beta_a1);
    maybe("beta_a2", cfg.scenario_spec.beta_a2);
    maybe("beta_as1", cfg.scenario_spec.beta_as1);
    maybe("beta_as2", cfg.scenario_spec.beta_as2);
    if (dgp.contains("calibration_mc")) cfg.calibration_mc = dgp["calibration_mc"].get<long>();
    if (dgp.contains("beta_w")) {
      for (auto it = dgp["beta_w"].begin(); it != dgp["beta_w"].end(); ++it) {
        const int idx = cfg.copula.index_of(it.key());
        if (idx < 0)
          throw std::runtime_error("config: dgp.beta_w names unknown covariate " + it.key());
        cfg.scenario_spec.beta_w[idx] = it.value().get<double>();
      }
    }
  } else {
    cfg.scenario_spec = default_scenario(cfg.scenario, cfg.copula);
  }

  if (j.contains("subgroup")) {
    const auto& sg = j["subgroup"];
    expect_keys(sg, {"kind", "alpha1", "alpha0", "target_prevalence"}, "subgroup");
    if (sg.contains("kind")) cfg.subgroup.kind = subgroup_kind_from_string(sg["kind"].get<std::string>());
    if (sg.contains("alpha1")) cfg.subgroup.alpha1 = sg["alpha1"].get<double>();
    if (sg.contains("alpha0") && !sg["alpha0"].is_null()) cfg.alpha0 = sg["alpha0"].get<double>();
    if (sg.contains("target_prevalence")) cfg.target_prevalence = sg["target_prevalence"].get<double>();
  }

  if (j.contains("hal")) {
    const auto& hal = j["hal"];
    expect_keys(hal, {"screen", "fit"}, "hal");
    auto parse_spec = [&](const json& js, BasisSpec& spec, const std::string& path) {
      expect_keys(js, {"max_degree", "smoothness", "num_knots"}, path);
      if (js.contains("max_degree")) spec.max_degree = js["max_degree"].get<int>();
      if (js.contains("smoothness")) spec.smoothness = js["smoothness"].get<int>();
      if (js.contains("num_knots")) spec.num_knots = js["num_knots"].get<int>();
    };
    if (hal.contains("screen")) parse_spec(hal["screen"], cfg.hal_screen, "hal.screen");
    if (hal.contains("fit")) parse_spec(hal["fit"], cfg.hal_fit, "hal.fit");
  }

  if (j.contains("learners")) {
    const auto& lrn = j["learners"];
    expect_keys(lrn, {"candidates", "cv_folds"}, "learners");
    if (lrn.contains("candidates")) {
      cfg.learners.clear();
      for (const auto& id : lrn["candidates"])
        cfg.learners.push_back(learner_from_string(id.get<std::string>()));
    }
    if (lrn.contains("cv_folds")) cfg.cv_folds = lrn["cv_folds"].get<int>();
  }

  if (j.contains("estimators")) {
    const auto& est = j["estimators"];
    expect_keys(est, {"list", "g_known", "loop_cap", "seed"}, "estimators");
    if (est.contains("list")) cfg.estimators = est["list"].get<std::vector<std::string>>();
    if (est.contains("g_known")) cfg.g_known = est["g_known"].get<bool>();
    if (est.contains("loop_cap")) cfg.atmle_loop_cap = est["loop_cap"].get<int>();
    if (est.contains("seed")) cfg.seed = est["seed"].get<std::uint64_t>();
  }

  if (j.contains("bench")) {
    const auto& bench = j["bench"];
    expect_keys(bench, {"n", "reps", "truth_mc"}, "bench");
    if (bench.contains("n")) cfg.bench_n = bench["n"].get<long>();
    if (bench.contains("reps")) cfg.bench_reps = bench["reps"].get<long>();
    if (bench.contains("truth_mc")) cfg.truth_mc = bench["truth_mc"].get<long>();
  }

  for (const auto& name : cfg.estimators) {
    bool known = false;
    for (const auto& id : estimator_names())
      if (id == name) known = true;
    if (!known) throw std::runtime_error("config: estimators.list has unknown id " + name);
  }
  if (cfg.bench_reps < 1) throw std::runtime_error("config: bench.reps must be >= 1");
  if (cfg.bench_n < 100) throw std::runtime_error("config: bench.n must be >= 100");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

PreparedDgp prepare_dgp(const RunConfig& cfg) {
  PreparedDgp out;
  out.copula = cfg.copula;
  out.subgroup = cfg.subgroup;
  out.spec = cfg.scenario_spec;
  out.subgroup.alpha0 =
      cfg.alpha0 ? *cfg.alpha0
                 : calibrate_alpha0(out.subgroup, out.copula, cfg.target_prevalence,
                                    cfg.seed, cfg.calibration_mc);
  if (out.spec.eta <= 0.0)
    calibrate_eta(out.spec, out.copula, out.subgroup, cfg.seed, cfg.calibration_mc);
  return out;
}

EstimatorConfig estimator_config(const RunConfig& cfg) {
  EstimatorConfig ec;
  ec.g_known = cfg.g_known;
  ec.cv_folds = cfg.cv_folds;
  ec.seed = cfg.seed;
  ec.atmle_loop_cap = cfg.atmle_loop_cap;
  ec.hal_screen = cfg.hal_screen;
  ec.hal_fit = cfg.hal_fit;
  ec.learners = cfg.learners;
  return ec;
}

}  // namespace sgtmle
