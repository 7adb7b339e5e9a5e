#include "sgtmle/bench.hpp"

#include "sgtmle/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace sgtmle {

namespace {

using nlohmann::json;

// serialization of only the sections that determine the generator and truth
std::string truth_key(const RunConfig& cfg) {
  json full = json::parse(config_to_json(cfg));
  json key;
  key["dgp"] = full["dgp"];
  key["subgroup"] = full["subgroup"];
  key["seed"] = cfg.seed;
  key["truth_mc"] = cfg.truth_mc;
  return key.dump();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

TruthRecord cached_truth(const RunConfig& cfg) {
  static std::mutex mu;
  static std::unordered_map<std::string, TruthRecord> cache;
  const std::string key = truth_key(cfg);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto prepared = prepare_dgp(cfg);
  auto truth = compute_truth(prepared.spec, prepared.copula, prepared.subgroup,
                             cfg.truth_mc, stream_seed(cfg.seed, 0, "truth"));
  TruthRecord rec;
  rec.alpha0 = prepared.subgroup.alpha0;
  rec.eta = prepared.spec.eta;
  rec.psi_true = truth.psi_true;
  rec.mc_se = truth.mc_se;
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, rec);
  return rec;
}

BenchResult run_benchmark(const RunConfig& cfg, int threads) {
  if (cfg.bench_reps < 1) throw std::invalid_argument("run_benchmark: reps must be >= 1");
  if (cfg.bench_n < 100) throw std::invalid_argument("run_benchmark: n must be >= 100");
  if (threads < 1) threads = 1;

  const auto rec = cached_truth(cfg);
  auto prepared = prepare_dgp(cfg);
  prepared.subgroup.alpha0 = rec.alpha0;
  prepared.spec.eta = rec.eta;
  const auto est_cfg = estimator_config(cfg);

  const auto reps = cfg.bench_reps;
  const auto n_est = cfg.estimators.size();
  // per (rep, estimator): psi, ci bounds, failure flag
  std::vector<std::vector<double>> psi(n_est, std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<std::vector<double>> lo(n_est, std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<std::vector<double>> hi(n_est, std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<std::vector<char>> failed(n_est,
                                        std::vector<char>(static_cast<std::size_t>(reps), 0));

  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      const long r = next.fetch_add(1);
      if (r >= reps) return;
      TrialDataset data;
      try {
        data = simulate(prepared.spec, prepared.copula, prepared.subgroup, cfg.bench_n,
                        cfg.seed, static_cast<std::uint64_t>(r) + 1);
      } catch (const std::exception&) {
        for (std::size_t e = 0; e < n_est; ++e) failed[e][static_cast<std::size_t>(r)] = 1;
        continue;
      }
      for (std::size_t e = 0; e < n_est; ++e) {
        try {
          auto rep = run_estimator(cfg.estimators[e], data, est_cfg);
          psi[e][static_cast<std::size_t>(r)] = rep.psi_hat;
          lo[e][static_cast<std::size_t>(r)] = rep.ci_low;
          hi[e][static_cast<std::size_t>(r)] = rep.ci_high;
        } catch (const std::exception&) {
          failed[e][static_cast<std::size_t>(r)] = 1;
        }
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BenchResult result;
  result.psi_true = rec.psi_true;
  result.truth_mc_se = rec.mc_se;
  result.eta = rec.eta;
  result.alpha0 = rec.alpha0;
  result.reps = reps;

  json failures;
  for (std::size_t e = 0; e < n_est; ++e) {
    long used = 0, bad = 0;
    double mean = 0.0;
    for (long r = 0; r < reps; ++r) {
      if (failed[e][static_cast<std::size_t>(r)]) {
        ++bad;
        continue;
      }
      ++used;
      mean += psi[e][static_cast<std::size_t>(r)];
    }
    failures[cfg.estimators[e]] = bad;
    if (bad > reps / 20)
      throw std::runtime_error("run_benchmark: estimator " + cfg.estimators[e] + " failed " +
                               std::to_string(bad) + "/" + std::to_string(reps) +
                               " replications (over the 5% cap)");
    if (used == 0)
      throw std::runtime_error("run_benchmark: estimator " + cfg.estimators[e] +
                               " produced no successful replications");
    mean /= static_cast<double>(used);

    double ss = 0.0, mse = 0.0, cover = 0.0;
    for (long r = 0; r < reps; ++r) {
      if (failed[e][static_cast<std::size_t>(r)]) continue;
      const double p = psi[e][static_cast<std::size_t>(r)];
      ss += (p - mean) * (p - mean);
      mse += (p - rec.psi_true) * (p - rec.psi_true);
      if (lo[e][static_cast<std::size_t>(r)] <= rec.psi_true &&
          rec.psi_true <= hi[e][static_cast<std::size_t>(r)])
        cover += 1.0;
    }
    const double sd = used > 1 ? std::sqrt(ss / static_cast<double>(used - 1)) : 0.0;
    double oracle = 0.0;
    for (long r = 0; r < reps; ++r) {
      if (failed[e][static_cast<std::size_t>(r)]) continue;
      const double p = psi[e][static_cast<std::size_t>(r)];
      if (p - 1.96 * sd <= rec.psi_true && rec.psi_true <= p + 1.96 * sd) oracle += 1.0;
    }

    MetricsRow row;
    row.scenario = cfg.scenario;
    row.estimator = cfg.estimators[e];
    row.abs_bias = std::abs(mean - rec.psi_true);
    row.empirical_se = sd;
    row.mse = mse / static_cast<double>(used);
    row.coverage = cover / static_cast<double>(used);
    row.oracle_coverage = oracle / static_cast<double>(used);
    row.reps_used = used;
    row.reps_failed = bad;
    result.rows.push_back(std::move(row));
  }

  json manifest;
  manifest["config_hash"] = fnv1a(config_to_json(cfg));
  manifest["seed"] = cfg.seed;
  manifest["scenario"] = cfg.scenario;
  manifest["n"] = cfg.bench_n;
  manifest["reps"] = reps;
  manifest["psi_true"] = rec.psi_true;
  manifest["truth_mc_se"] = rec.mc_se;
  manifest["eta"] = rec.eta;
  manifest["alpha0"] = rec.alpha0;
  manifest["failures"] = failures;
  result.manifest = manifest.dump(2);
  return result;
}

std::string report_csv(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("report_csv: no rows");
  std::string out =
      "scenario,estimator,abs_bias_x100,se_x100,mse_x100,coverage,oracle_coverage,"
      "reps_used,reps_failed\n";
  for (const auto& r : rows) {
    out += std::to_string(r.scenario) + "," + r.estimator + "," +
           format_double(r.abs_bias * 100.0) + "," + format_double(r.empirical_se * 100.0) +
           "," + format_double(r.mse * 100.0) + "," + format_double(r.coverage) + "," +
           format_double(r.oracle_coverage) + "," + std::to_string(r.reps_used) + "," +
           std::to_string(r.reps_failed) + "\n";
  }
  return out;
}

std::string report_markdown(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("report_markdown: no rows");
  std::string out =
      "| Scenario | Estimator | |Bias| (x1e-2) | SE (x1e-2) | MSE (x1e-2) | Coverage | "
      "Oracle Coverage |\n|---|---|---|---|---|---|---|\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };
  for (const auto& r : rows)
    out += "| " + std::to_string(r.scenario) + " | " + r.estimator + " | " +
           fmt(r.abs_bias * 100.0) + " | " + fmt(r.empirical_se * 100.0) + " | " +
           fmt(r.mse * 100.0) + " | " + fmt(r.coverage) + " | " + fmt(r.oracle_coverage) +
           " |\n";
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricsRow> rows;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_metrics_csv: empty input");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (cells.size() != 9) throw std::runtime_error("parse_metrics_csv: bad column count");
    auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto rc = std::from_chars(s.data(), s.data() + s.size(), v);
      if (rc.ec != std::errc() || rc.ptr != s.data() + s.size())
        throw std::runtime_error("parse_metrics_csv: bad number " + s);
      return v;
    };
    MetricsRow r;
    r.scenario = static_cast<int>(num(cells[0]));
    r.estimator = cells[1];
    r.abs_bias = num(cells[2]) / 100.0;
    r.empirical_se = num(cells[3]) / 100.0;
    r.mse = num(cells[4]) / 100.0;
    r.coverage = num(cells[5]);
    r.oracle_coverage = num(cells[6]);
    r.reps_used = static_cast<long>(num(cells[7]));
    r.reps_failed = static_cast<long>(num(cells[8]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace sgtmle
