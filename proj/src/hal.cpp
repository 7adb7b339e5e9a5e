#include "sgtmle/hal.hpp"

#include "sgtmle/lasso.hpp"
#include "sgtmle/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace sgtmle {

namespace {

bool is_binary_column(const Eigen::VectorXd& c) {
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (c[i] != 0.0 && c[i] != 1.0) return false;
  return true;
}

// type-7 empirical quantile on a sorted copy
std::vector<double> marginal_knots(const Eigen::VectorXd& col, int k) {
  std::vector<double> sorted(col.data(), col.data() + col.size());
  std::sort(sorted.begin(), sorted.end());
  const double n1 = static_cast<double>(sorted.size()) - 1.0;
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double p = (j + 0.5) / static_cast<double>(k);
    const double h = p * n1;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double q = sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
    if (knots.empty() || q > knots.back()) knots.push_back(q);
  }
  return knots;
}

std::uint64_t column_hash(const Eigen::VectorXd& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    h ^= std::bit_cast<std::uint64_t>(c[i]);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::vector<std::vector<int>> enumerate_subspaces(int d, int m) {
  if (d < 1) throw std::invalid_argument("enumerate_subspaces: d must be positive");
  m = std::min(m, d);
  std::vector<std::vector<int>> out;
  std::vector<int> idx;
  for (int size = 1; size <= m; ++size) {
    idx.assign(static_cast<std::size_t>(size), 0);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
      out.push_back(idx);
      int k = size - 1;
      while (k >= 0 && idx[static_cast<std::size_t>(k)] == d - size + k) --k;
      if (k < 0) break;
      ++idx[static_cast<std::size_t>(k)];
      for (int j = k + 1; j < size; ++j)
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return out;
}

HalDesign build_design(const Eigen::MatrixXd& cols, const BasisSpec& spec,
                       const std::vector<std::vector<int>>& subspaces) {
  const Eigen::Index n = cols.rows();
  const int d = static_cast<int>(cols.cols());
  if (n < 2) throw std::invalid_argument("build_design: need at least 2 rows");
  if (spec.num_knots < 1) throw std::invalid_argument("build_design: num_knots must be >= 1");

  std::vector<bool> binary(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) binary[static_cast<std::size_t>(j)] = is_binary_column(cols.col(j));

  // per (coordinate, per-coordinate count) knot cache
  std::unordered_map<std::int64_t, std::vector<double>> knot_cache;
  auto knots_for = [&](int coord, int k) -> const std::vector<double>& {
    if (binary[static_cast<std::size_t>(coord)]) {
      static const std::vector<double> one{1.0};
      return one;
    }
    const std::int64_t key = static_cast<std::int64_t>(coord) * 64 + k;
    auto it = knot_cache.find(key);
    if (it == knot_cache.end())
      it = knot_cache.emplace(key, marginal_knots(cols.col(coord), k)).first;
    return it->second;
  };

  HalDesign design;
  design.subspaces = subspaces;
  std::vector<Eigen::VectorXd> columns;
  std::unordered_map<std::uint64_t, std::vector<int>> seen;

  for (std::size_t s = 0; s < subspaces.size(); ++s) {
    const auto& coords = subspaces[s];
    const int c = static_cast<int>(coords.size());
    const int per = std::max(
        1, static_cast<int>(std::floor(std::pow(static_cast<double>(spec.num_knots),
                                                1.0 / static_cast<double>(c)) +
                                       1e-9)));
    // cartesian product over per-coordinate knot lists
    std::vector<const std::vector<double>*> lists;
    lists.reserve(static_cast<std::size_t>(c));
    for (int coord : coords) lists.push_back(&knots_for(coord, per));
    std::vector<std::size_t> pick(static_cast<std::size_t>(c), 0);
    for (;;) {
      BasisFunction bf;
      bf.coords = coords;
      bf.knots.resize(static_cast<std::size_t>(c));
      bf.orders.resize(static_cast<std::size_t>(c));
      for (int k = 0; k < c; ++k) {
        bf.knots[static_cast<std::size_t>(k)] = (*lists[static_cast<std::size_t>(k)])[pick[static_cast<std::size_t>(k)]];
        bf.orders[static_cast<std::size_t>(k)] =
            binary[static_cast<std::size_t>(coords[static_cast<std::size_t>(k)])]
                ? 0
                : static_cast<std::uint8_t>(spec.smoothness);
      }
      Eigen::VectorXd col(n);
      for (Eigen::Index i = 0; i < n; ++i) col[i] = bf.eval(cols.row(i));
      // drop empty/constant columns and exact duplicates
      const double mn = col.minCoeff();
      const double mx = col.maxCoeff();
      if (mx > mn) {
        const std::uint64_t h = column_hash(col);
        bool dup = false;
        for (int idx : seen[h])
          if (columns[static_cast<std::size_t>(idx)] == col) {
            dup = true;
            break;
          }
        if (!dup) {
          seen[h].push_back(static_cast<int>(columns.size()));
          columns.push_back(std::move(col));
          design.basis.push_back(std::move(bf));
          design.group.push_back(static_cast<int>(s));
        }
      }
      // advance the product index
      int k = c - 1;
      while (k >= 0) {
        if (++pick[static_cast<std::size_t>(k)] < lists[static_cast<std::size_t>(k)]->size()) break;
        pick[static_cast<std::size_t>(k)] = 0;
        --k;
      }
      if (k < 0) break;
    }
  }

  design.x.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    design.x.col(static_cast<Eigen::Index>(j)) = columns[j];
  return design;
}

namespace {

struct GroupProblem {
  Eigen::MatrixXd x;               // standardized columns
  Eigen::VectorXd w;               // weights normalized to sum n
  std::vector<std::vector<int>> cols_of;  // group -> usable column indices
  std::vector<double> gweight;     // sqrt(p_s) over usable columns
  std::vector<double> lipschitz;   // per group, for the prox step
  std::vector<bool> penalized;
  int n_groups = 0;
};

GroupProblem prepare(const HalDesign& design, const Eigen::VectorXd& weights,
                     const std::vector<int>& unpenalized_groups) {
  const Eigen::Index n = design.x.rows();
  const Eigen::Index p = design.x.cols();
  GroupProblem gp;
  gp.n_groups = static_cast<int>(design.subspaces.size());
  gp.w = weights * (static_cast<double>(n) / weights.sum());
  gp.x = design.x;
  gp.cols_of.assign(static_cast<std::size_t>(gp.n_groups), {});
  for (Eigen::Index j = 0; j < p; ++j) {
    const double m = gp.w.dot(gp.x.col(j)) / static_cast<double>(n);
    gp.x.col(j).array() -= m;
    const double var = gp.w.dot(gp.x.col(j).cwiseAbs2()) / static_cast<double>(n);
    if (var > 1e-14) {
      gp.x.col(j) /= std::sqrt(var);
      gp.cols_of[static_cast<std::size_t>(design.group[static_cast<std::size_t>(j)])].push_back(
          static_cast<int>(j));
    } else {
      gp.x.col(j).setZero();
    }
  }
  gp.gweight.resize(static_cast<std::size_t>(gp.n_groups));
  gp.lipschitz.assign(static_cast<std::size_t>(gp.n_groups), 0.0);
  gp.penalized.assign(static_cast<std::size_t>(gp.n_groups), true);
  for (int g : unpenalized_groups) gp.penalized[static_cast<std::size_t>(g)] = false;
  for (int s = 0; s < gp.n_groups; ++s) {
    const auto& cols = gp.cols_of[static_cast<std::size_t>(s)];
    gp.gweight[static_cast<std::size_t>(s)] = std::sqrt(static_cast<double>(cols.size()));
    if (cols.empty()) continue;
    const auto ps = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd gram(ps, ps);
    for (Eigen::Index a = 0; a < ps; ++a)
      for (Eigen::Index b = a; b < ps; ++b) {
        const double v = gp.x.col(cols[static_cast<std::size_t>(a)])
                             .cwiseProduct(gp.w)
                             .dot(gp.x.col(cols[static_cast<std::size_t>(b)])) /
                         static_cast<double>(n);
        gram(a, b) = v;
        gram(b, a) = v;
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    gp.lipschitz[static_cast<std::size_t>(s)] = std::max(es.eigenvalues().maxCoeff(), 1e-12);
  }
  return gp;
}

// prox block descent at one lambda; beta/b0/resid updated in place
bool solve_at(const GroupProblem& gp, double lambda, double tol, int max_sweeps,
              Eigen::VectorXd& beta, double& b0, Eigen::VectorXd& resid) {
  const Eigen::Index n = gp.x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double wsum = gp.w.sum();

  std::vector<bool> active(static_cast<std::size_t>(gp.n_groups), false);
  for (int s = 0; s < gp.n_groups; ++s) {
    if (gp.cols_of[static_cast<std::size_t>(s)].empty()) continue;
    if (!gp.penalized[static_cast<std::size_t>(s)]) {
      active[static_cast<std::size_t>(s)] = true;
      continue;
    }
    for (int j : gp.cols_of[static_cast<std::size_t>(s)])
      if (beta[j] != 0.0) {
        active[static_cast<std::size_t>(s)] = true;
        break;
      }
  }

  bool converged = true;
  for (;;) {
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
      double max_delta = 0.0;
      {
        const double d = gp.w.dot(resid) / wsum;
        if (d != 0.0) {
          b0 += d;
          resid.array() -= d;
          max_delta = std::abs(d);
        }
      }
      for (int s = 0; s < gp.n_groups; ++s) {
        if (!active[static_cast<std::size_t>(s)]) continue;
        const auto& cols = gp.cols_of[static_cast<std::size_t>(s)];
        const double L = gp.lipschitz[static_cast<std::size_t>(s)];
        Eigen::VectorXd u(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k)
          u[static_cast<Eigen::Index>(k)] =
              beta[cols[k]] +
              gp.x.col(cols[k]).cwiseProduct(gp.w).dot(resid) * inv_n / L;
        double shrink = 1.0;
        if (gp.penalized[static_cast<std::size_t>(s)]) {
          const double un = u.norm();
          shrink = un > 0.0
                       ? std::max(0.0, 1.0 - lambda * gp.gweight[static_cast<std::size_t>(s)] /
                                                 (L * un))
                       : 0.0;
        }
        for (std::size_t k = 0; k < cols.size(); ++k) {
          const double bnew = shrink * u[static_cast<Eigen::Index>(k)];
          const double d = bnew - beta[cols[k]];
          if (d != 0.0) {
            resid -= d * gp.x.col(cols[k]);
            beta[cols[k]] = bnew;
            max_delta = std::max(max_delta, std::abs(d));
          }
        }
      }
      if (max_delta < tol) break;
    }
    if (sweep >= max_sweeps) converged = false;
    // KKT pass over inactive groups
    Eigen::VectorXd grad = gp.x.transpose() * gp.w.cwiseProduct(resid) * inv_n;
    bool violation = false;
    for (int s = 0; s < gp.n_groups; ++s) {
      if (active[static_cast<std::size_t>(s)]) continue;
      const auto& cols = gp.cols_of[static_cast<std::size_t>(s)];
      if (cols.empty()) continue;
      double nrm2 = 0.0;
      for (int j : cols) nrm2 += grad[j] * grad[j];
      if (std::sqrt(nrm2) > lambda * gp.gweight[static_cast<std::size_t>(s)] + 0.1 * tol) {
        active[static_cast<std::size_t>(s)] = true;
        violation = true;
      }
    }
    if (!violation) break;
  }
  return converged;
}

double group_lambda_max(const GroupProblem& gp, const Eigen::VectorXd& y,
                        Eigen::VectorXd& beta, double& b0, Eigen::VectorXd& resid) {
  const Eigen::Index n = gp.x.rows();
  // fit intercept + unpenalized groups first
  beta.setZero();
  b0 = gp.w.dot(y) / gp.w.sum();
  resid = y.array() - b0;
  bool any_unpen = false;
  for (int s = 0; s < gp.n_groups; ++s)
    if (!gp.penalized[static_cast<std::size_t>(s)] &&
        !gp.cols_of[static_cast<std::size_t>(s)].empty())
      any_unpen = true;
  if (any_unpen) solve_at(gp, std::numeric_limits<double>::infinity(), 1e-10, 5000, beta, b0, resid);
  Eigen::VectorXd grad = gp.x.transpose() * gp.w.cwiseProduct(resid) / static_cast<double>(n);
  double lmax = 0.0;
  for (int s = 0; s < gp.n_groups; ++s) {
    if (!gp.penalized[static_cast<std::size_t>(s)]) continue;
    const auto& cols = gp.cols_of[static_cast<std::size_t>(s)];
    if (cols.empty()) continue;
    double nrm2 = 0.0;
    for (int j : cols) nrm2 += grad[j] * grad[j];
    lmax = std::max(lmax, std::sqrt(nrm2) / gp.gweight[static_cast<std::size_t>(s)]);
  }
  return lmax;
}

}  // namespace

Eigen::VectorXd group_lasso_solve(const HalDesign& design, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& weights, double lambda,
                                  const std::vector<int>& unpenalized_groups,
                                  const GroupLassoOptions& opts) {
  auto gp = prepare(design, weights, unpenalized_groups);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.x.cols());
  double b0 = 0.0;
  Eigen::VectorXd resid;
  group_lambda_max(gp, y, beta, b0, resid);
  solve_at(gp, lambda, opts.tol, opts.max_sweeps, beta, b0, resid);
  return beta;  // standardized-scale coefficients; supports only need the zero pattern
}

ScreenResult group_lasso_screen(const HalDesign& design, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weights,
                                const std::vector<int>& unpenalized_groups,
                                const GroupLassoOptions& opts) {
  if (design.x.rows() != y.size())
    throw std::invalid_argument("group_lasso_screen: row mismatch");
  auto gp = prepare(design, weights, unpenalized_groups);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.x.cols());
  double b0 = 0.0;
  Eigen::VectorXd resid;
  const double lmax = group_lambda_max(gp, y, beta, b0, resid);

  ScreenResult result;
  std::vector<int> base;  // unpenalized groups present in every support
  for (int s = 0; s < gp.n_groups; ++s)
    if (!gp.penalized[static_cast<std::size_t>(s)] &&
        !gp.cols_of[static_cast<std::size_t>(s)].empty())
      base.push_back(s);
  result.supports.push_back(base);
  if (lmax <= 0.0) return result;

  const auto path = lambda_path(lmax, opts.path_points, opts.min_ratio);
  for (double lambda : path) {
    if (!solve_at(gp, lambda, opts.tol, opts.max_sweeps, beta, b0, resid))
      result.converged = false;
    std::vector<int> support = base;
    for (int s = 0; s < gp.n_groups; ++s) {
      if (!gp.penalized[static_cast<std::size_t>(s)]) continue;
      for (int j : gp.cols_of[static_cast<std::size_t>(s)])
        if (beta[j] != 0.0) {
          support.push_back(s);
          break;
        }
    }
    std::sort(support.begin(), support.end());
    if (support.empty()) continue;
    bool dup = false;
    for (const auto& prev : result.supports)
      if (prev == support) {
        dup = true;
        break;
      }
    if (!dup) result.supports.push_back(support);
    if (static_cast<int>(result.supports.size()) > opts.max_supports) break;
  }
  if (static_cast<int>(result.supports.size()) > opts.max_supports + 1)
    result.supports.resize(static_cast<std::size_t>(opts.max_supports) + 1);
  return result;
}

Eigen::MatrixXd HalModel::design_at(const Eigen::MatrixXd& pts) const {
  Eigen::MatrixXd phi(pts.rows(), static_cast<Eigen::Index>(basis.size()) + 1);
  phi.col(0).setOnes();
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (std::size_t j = 0; j < basis.size(); ++j)
      phi(i, static_cast<Eigen::Index>(j) + 1) = basis[j].eval(pts.row(i));
  return phi;
}

Eigen::VectorXd HalModel::predict(const Eigen::MatrixXd& pts) const {
  return design_at(pts) * beta;
}

HalModel fit_cate_working_model(const Eigen::MatrixXd& cols, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& nu, const Eigen::VectorXd& prob,
                                const Eigen::VectorXd& indicator,
                                const BasisSpec& screen_spec, const BasisSpec& fit_spec,
                                int force_col, std::uint64_t seed, int cv_folds) {
  const Eigen::Index n = cols.rows();
  if (y.size() != n || nu.size() != n || prob.size() != n || indicator.size() != n)
    throw std::invalid_argument("fit_cate_working_model: length mismatch");

  // residualized pseudo-outcome; rows with negligible residual carry no signal
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(indicator[i] - prob[i]) >= 1e-6) keep.push_back(static_cast<int>(i));
  if (keep.size() < 20)
    throw std::runtime_error("fit_cate_working_model: fewer than 20 usable rows");

  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd xk(m, cols.cols());
  Eigen::VectorXd ytil(m), wts(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int r = keep[static_cast<std::size_t>(i)];
    const double res = indicator[r] - prob[r];
    xk.row(i) = cols.row(r);
    ytil[i] = (y[r] - nu[r]) / res;
    wts[i] = res * res;
  }

  // stage 1: screen subspaces
  const int d = static_cast<int>(cols.cols());
  auto subspaces = enumerate_subspaces(d, screen_spec.max_degree);
  HalDesign screen_design = build_design(xk, screen_spec, subspaces);
  std::vector<int> unpen_groups;
  if (force_col >= 0) {
    for (std::size_t s = 0; s < subspaces.size(); ++s)
      if (subspaces[s].size() == 1 && subspaces[s][0] == force_col)
        unpen_groups.push_back(static_cast<int>(s));
  }
  ScreenResult screen = group_lasso_screen(screen_design, ytil, wts, unpen_groups);

  // candidate evaluation order: smaller supports first so ties resolve small
  std::vector<int> order(screen.supports.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return screen.supports[static_cast<std::size_t>(a)].size() <
           screen.supports[static_cast<std::size_t>(b)].size();
  });

  // deterministic folds on the kept rows
  std::vector<int> folds(keep.size());
  {
    std::vector<int> idx(keep.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = make_rng(seed, 0, "hal-cv");
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      folds[static_cast<std::size_t>(idx[i])] = static_cast<int>(i % static_cast<std::size_t>(cv_folds));
  }

  struct Candidate {
    int support_rank;
    HalDesign design;
    std::vector<int> unpen_cols;
    std::vector<double> path;
    double cv_loss;
    int best_lambda;
  };

  double best_loss = std::numeric_limits<double>::infinity();
  int best_rank = -1;
  Candidate best;

  for (int rank : order) {
    const auto& support = screen.supports[static_cast<std::size_t>(rank)];
    Candidate cand;
    cand.support_rank = rank;
    cand.cv_loss = 0.0;
    cand.best_lambda = -1;

    std::vector<std::vector<int>> sub;
    for (int s : support) sub.push_back(subspaces[static_cast<std::size_t>(s)]);

    if (sub.empty()) {
      // intercept-only working model
      double loss = 0.0;
      for (int f = 0; f < cv_folds; ++f) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index i = 0; i < m; ++i)
          if (folds[static_cast<std::size_t>(i)] != f) {
            num += wts[i] * ytil[i];
            den += wts[i];
          }
        const double mu = den > 0.0 ? num / den : 0.0;
        for (Eigen::Index i = 0; i < m; ++i)
          if (folds[static_cast<std::size_t>(i)] == f)
            loss += wts[i] * (ytil[i] - mu) * (ytil[i] - mu);
      }
      cand.cv_loss = loss;
    } else {
      cand.design = build_design(xk, fit_spec, sub);
      if (force_col >= 0)
        for (Eigen::Index j = 0; j < cand.design.x.cols(); ++j) {
          const auto& g = cand.design.subspaces[static_cast<std::size_t>(
              cand.design.group[static_cast<std::size_t>(j)])];
          if (g.size() == 1 && g[0] == force_col)
            cand.unpen_cols.push_back(static_cast<int>(j));
        }
      if (cand.design.x.cols() == 0) continue;
      const double lmax =
          lasso_lambda_max(cand.design.x, ytil, Family::gaussian, cand.unpen_cols, &wts);
      if (lmax <= 0.0) continue;
      cand.path = lambda_path(lmax, 30, 1e-2);

      std::vector<double> loss_by_lambda(cand.path.size(), 0.0);
      bool ok = true;
      for (int f = 0; f < cv_folds && ok; ++f) {
        std::vector<int> tr, te;
        for (Eigen::Index i = 0; i < m; ++i)
          (folds[static_cast<std::size_t>(i)] == f ? te : tr).push_back(static_cast<int>(i));
        if (tr.size() < 5 || te.empty()) continue;
        Eigen::MatrixXd xtr(static_cast<Eigen::Index>(tr.size()), cand.design.x.cols());
        Eigen::VectorXd ytr(static_cast<Eigen::Index>(tr.size())),
            wtr(static_cast<Eigen::Index>(tr.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) {
          xtr.row(static_cast<Eigen::Index>(i)) = cand.design.x.row(tr[i]);
          ytr[static_cast<Eigen::Index>(i)] = ytil[tr[i]];
          wtr[static_cast<Eigen::Index>(i)] = wts[tr[i]];
        }
        try {
          auto fit = fit_lasso(xtr, ytr, cand.path, Family::gaussian, cand.unpen_cols, &wtr);
          for (std::size_t l = 0; l < cand.path.size(); ++l) {
            for (int i : te) {
              const double pred =
                  fit.intercepts[l] + cand.design.x.row(i).dot(fit.coefs[l]);
              loss_by_lambda[l] += wts[i] * (ytil[i] - pred) * (ytil[i] - pred);
            }
          }
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok) continue;
      const auto it = std::min_element(loss_by_lambda.begin(), loss_by_lambda.end());
      cand.cv_loss = *it;
      cand.best_lambda = static_cast<int>(it - loss_by_lambda.begin());
    }

    if (cand.cv_loss < best_loss - 1e-12) {
      best_loss = cand.cv_loss;
      best_rank = rank;
      best = std::move(cand);
    }
  }
  if (best_rank < 0)
    throw std::runtime_error("fit_cate_working_model: no viable candidate support");

  HalModel model;
  model.screen_converged = screen.converged;
  model.selected_support = best_rank;
  for (int s : screen.supports[static_cast<std::size_t>(best_rank)])
    model.support.push_back(subspaces[static_cast<std::size_t>(s)]);

  if (best.best_lambda < 0) {
    // intercept-only
    model.beta.resize(1);
    model.beta[0] = wts.dot(ytil) / wts.sum();
    return model;
  }

  std::vector<double> refit_path(best.path.begin(),
                                 best.path.begin() + best.best_lambda + 1);
  auto fit = fit_lasso(best.design.x, ytil, refit_path, Family::gaussian, best.unpen_cols, &wts);
  const auto li = refit_path.size() - 1;
  std::vector<bool> forced(static_cast<std::size_t>(best.design.x.cols()), false);
  for (int j : best.unpen_cols) forced[static_cast<std::size_t>(j)] = true;

  std::vector<int> kept_cols;
  for (Eigen::Index j = 0; j < best.design.x.cols(); ++j)
    if (fit.coefs[li][j] != 0.0 || forced[static_cast<std::size_t>(j)])
      kept_cols.push_back(static_cast<int>(j));

  model.beta.resize(static_cast<Eigen::Index>(kept_cols.size()) + 1);
  model.beta[0] = fit.intercepts[li];
  for (std::size_t k = 0; k < kept_cols.size(); ++k) {
    model.basis.push_back(best.design.basis[static_cast<std::size_t>(kept_cols[k])]);
    model.beta[static_cast<Eigen::Index>(k) + 1] = fit.coefs[li][kept_cols[k]];
  }
  return model;
}

}  // namespace sgtmle
