#include "sgtmle/bench.hpp"
#include "sgtmle/config.hpp"
#include "sgtmle/estimators.hpp"
#include "sgtmle/rng.hpp"
#include "sgtmle/theory.hpp"
#include "sgtmle/trial_data.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace sgtmle;

RunConfig load_or_default(const std::string& config_path, std::uint64_t seed_flag,
                          bool seed_given) {
  RunConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
  if (seed_given) cfg.seed = seed_flag;
  return cfg;
}

void write_output(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open output file " + out);
  f << content;
}

std::string estimate_csv(const std::vector<EstimateReport>& reports) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "estimator,psi_hat,se,ci_low,ci_high,psi_tilde,psi_pound,eic_mean,diagnostics\n";
  for (const auto& r : reports) {
    ss << r.estimator << "," << r.psi_hat << "," << r.se << "," << r.ci_low << ","
       << r.ci_high << ",";
    auto opt = [&](const char* key) {
      auto it = r.diagnostics.find(key);
      if (it != r.diagnostics.end()) ss << it->second;
    };
    opt("psi_tilde");
    ss << ",";
    opt("psi_pound");
    ss << ",";
    opt("eic_mean");
    ss << ",";
    bool first = true;
    for (const auto& [k, v] : r.diagnostics) {
      if (k == "psi_tilde" || k == "psi_pound" || k == "eic_mean") continue;
      if (!first) ss << ";";
      ss << k << "=" << v;
      first = false;
    }
    ss << "\n";
  }
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subgroup treatment-effect estimators for randomized trials"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // accept global flags after the subcommand name

  std::string config_path, out;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  bool print_defaults = false;

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "master seed")->each([&](const std::string&) {
    seed_given = true;
  });
  app.add_option("--out", out, "output path (default stdout)");
  app.add_option("--threads", threads, "worker threads for benchmark");
  app.add_flag("--print-defaults", print_defaults, "print the default config and exit");

  long sim_n = 2000;
  auto* sim = app.add_subcommand("simulate", "draw one trial dataset as CSV");
  sim->add_option("--n", sim_n, "sample size");

  auto* truth = app.add_subcommand("truth", "Monte Carlo truth for the configured DGP");

  std::string data_path;
  std::vector<std::string> which;
  auto* est = app.add_subcommand("estimate", "run estimators on a dataset CSV");
  est->add_option("--data", data_path, "input dataset CSV")->required();
  est->add_option("--estimators", which, "subset of estimators to run");

  auto* bench = app.add_subcommand("benchmark", "Monte Carlo benchmark metrics");
  std::string bench_format = "csv";
  bench->add_option("--format", bench_format, "csv or markdown");

  auto* theory = app.add_subcommand("theory-check", "exact-enumeration identity checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_defaults) {
      write_output(out, config_to_json(default_config()) + "\n");
      return 0;
    }
    RunConfig cfg = load_or_default(config_path, seed, seed_given);

    if (sim->parsed()) {
      auto prepared = prepare_dgp(cfg);
      auto data = simulate(prepared.spec, prepared.copula, prepared.subgroup, sim_n,
                           cfg.seed, 1);
      write_output(out, to_csv(data));
      return 0;
    }
    if (truth->parsed()) {
      auto rec = cached_truth(cfg);
      std::ostringstream ss;
      ss.precision(17);
      ss << "psi_true,mc_se,eta,alpha0\n"
         << rec.psi_true << "," << rec.mc_se << "," << rec.eta << "," << rec.alpha0 << "\n";
      write_output(out, ss.str());
      return 0;
    }
    if (est->parsed()) {
      auto data = load_csv(data_path);
      auto names = which.empty() ? cfg.estimators : which;
      auto ec = estimator_config(cfg);
      std::vector<EstimateReport> reports;
      bool any_failed = false;
      for (const auto& name : names) {
        try {
          reports.push_back(run_estimator(name, data, ec));
        } catch (const std::exception& e) {
          std::cerr << "estimator " << name << " failed: " << e.what() << "\n";
          any_failed = true;
        }
      }
      write_output(out, estimate_csv(reports));
      return reports.empty() && any_failed ? 1 : 0;
    }
    if (bench->parsed()) {
      auto result = run_benchmark(cfg, threads);
      std::string body = bench_format == "markdown" ? report_markdown(result.rows)
                                                    : report_csv(result.rows);
      write_output(out, body);
      std::cerr << result.manifest << "\n";
      return 0;
    }
    if (theory->parsed()) {
      // truth and a perturbation differing in Q, g, and p(S=1)
      DiscreteToy p0;
      p0.w_values = {0.0, 1.0, 2.0};
      p0.p_s1 = 0.3;
      p0.pw1 = {0.2, 0.5, 0.3};
      p0.pw0 = {0.4, 0.4, 0.2};
      p0.g1 = 0.5;
      p0.q1.resize(3, 2);
      p0.q1 << 0.20, 0.35, 0.30, 0.45, 0.40, 0.55;
      p0.q0.resize(3, 2);
      p0.q0 << 0.25, 0.30, 0.35, 0.40, 0.45, 0.50;
      DiscreteToy p = p0;
      p.p_s1 = 0.4;
      p.g1 = 0.6;
      p.q1.array() += 0.05;
      auto report = theory_checks(p0, p);
      std::ostringstream ss;
      ss.precision(17);
      ss << "mean_zero_error," << report.mean_zero_error << "\n"
         << "lemma2_error," << report.lemma2_error << "\n"
         << "known_g_error," << report.known_g_error << "\n"
         << "pass," << (report.pass ? 1 : 0) << "\n";
      write_output(out, ss.str());
      return report.pass ? 0 : 1;
    }
    std::cout << app.help();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
