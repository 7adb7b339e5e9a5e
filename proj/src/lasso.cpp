#include "sgtmle/lasso.hpp"

#include "sgtmle/glm.hpp"

#include <cmath>
#include <stdexcept>

namespace sgtmle {

namespace {

struct Standardized {
  Eigen::MatrixXd x;       // centered and scaled columns (constant columns zeroed)
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;   // 0 marks a constant column
  Eigen::VectorXd w;       // weights normalized to sum n
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (!X.allFinite()) throw std::invalid_argument("fit_lasso: non-finite value in design");
  Standardized st;
  st.w = weights ? (*weights * (static_cast<double>(n) / weights->sum())).eval()
                 : Eigen::VectorXd::Ones(n);
  st.mean.resize(p);
  st.scale.resize(p);
  st.x = X;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double m = st.w.dot(X.col(j)) / static_cast<double>(n);
    st.mean[j] = m;
    st.x.col(j).array() -= m;
    const double var = st.w.dot(st.x.col(j).cwiseAbs2()) / static_cast<double>(n);
    st.scale[j] = var > 1e-14 ? std::sqrt(var) : 0.0;
    if (st.scale[j] > 0.0)
      st.x.col(j) /= st.scale[j];
    else
      st.x.col(j).setZero();
  }
  return st;
}

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Penalized weighted least squares on standardized columns; v are the current
// quadratic weights (equal to st.w for gaussian). beta/b0 are updated in place,
// resid tracks z - b0 - x*beta.
void cd_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& v,
              const std::vector<bool>& penalized, const std::vector<bool>& usable,
              double lambda, double tol, Eigen::VectorXd& beta, double& b0,
              Eigen::VectorXd& resid) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double vsum = v.sum();

  // v is fixed for the whole subproblem: cache the v-weighted columns so the
  // inner-loop gradients are plain dot products
  Eigen::MatrixXd xv = x.array().colwise() * v.array();

  Eigen::VectorXd colnorm(p);
  for (Eigen::Index j = 0; j < p; ++j)
    colnorm[j] = usable[static_cast<std::size_t>(j)] ? xv.col(j).dot(x.col(j)) * inv_n : 0.0;

  std::vector<bool> active(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j)
    if (usable[static_cast<std::size_t>(j)] &&
        (beta[j] != 0.0 || !penalized[static_cast<std::size_t>(j)]))
      active[static_cast<std::size_t>(j)] = true;

  // exact solve of the fixed-sign KKT system on the current nonzero set; a
  // jump is taken only when it lowers the penalized objective, so the cyclic
  // descent below still guarantees convergence
  auto try_accelerate = [&]() {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j)
      if (active[static_cast<std::size_t>(j)] && colnorm[j] > 0.0 &&
          (beta[j] != 0.0 || !penalized[static_cast<std::size_t>(j)]))
        cols.push_back(j);
    const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd G(k + 1, k + 1);
    Eigen::VectorXd cur(k + 1), rhs(k + 1), sgn(k + 1);
    G(0, 0) = vsum * inv_n;
    cur[0] = b0;
    rhs[0] = v.dot(resid) * inv_n;
    sgn[0] = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
      G(0, a + 1) = G(a + 1, 0) = xv.col(cols[static_cast<std::size_t>(a)]).sum() * inv_n;
      for (Eigen::Index b = a; b < k; ++b)
        G(a + 1, b + 1) = G(b + 1, a + 1) =
            xv.col(cols[static_cast<std::size_t>(a)])
                .dot(x.col(cols[static_cast<std::size_t>(b)])) *
            inv_n;
      const Eigen::Index j = cols[static_cast<std::size_t>(a)];
      cur[a + 1] = beta[j];
      rhs[a + 1] = xv.col(j).dot(resid) * inv_n;
      sgn[a + 1] = penalized[static_cast<std::size_t>(j)] && beta[j] != 0.0
                       ? (beta[j] > 0.0 ? 1.0 : -1.0)
                       : 0.0;
    }
    rhs += G * cur;  // = X' V z / n including the intercept column
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success) return;
    Eigen::VectorXd cand = ldlt.solve(rhs - lambda * sgn);
    if (!cand.allFinite()) return;
    auto penalty = [&](const Eigen::VectorXd& b) {
      double s = 0.0;
      for (Eigen::Index a = 0; a < k; ++a)
        if (penalized[static_cast<std::size_t>(cols[static_cast<std::size_t>(a)])])
          s += std::abs(b[a + 1]);
      return lambda * s;
    };
    Eigen::VectorXd resid_new = resid;
    resid_new.array() += cur[0] - cand[0];
    for (Eigen::Index a = 0; a < k; ++a)
      resid_new += (cur[a + 1] - cand[a + 1]) * x.col(cols[static_cast<std::size_t>(a)]);
    const double f_cur = 0.5 * v.dot(resid.cwiseAbs2()) * inv_n + penalty(cur);
    const double f_new = 0.5 * v.dot(resid_new.cwiseAbs2()) * inv_n + penalty(cand);
    if (f_new >= f_cur) return;
    b0 = cand[0];
    for (Eigen::Index a = 0; a < k; ++a) beta[cols[static_cast<std::size_t>(a)]] = cand[a + 1];
    resid = std::move(resid_new);
  };

  constexpr int kMaxSweeps = 10000;
  for (;;) {
    // converge on the active set
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      if (sweep == 3 || sweep == 10 || sweep == 30 || sweep == 100 || sweep == 300 ||
          sweep == 1000 || sweep == 3000)
        try_accelerate();
      double max_delta = 0.0;
      {
        const double d = v.dot(resid) / vsum;
        if (d != 0.0) {
          b0 += d;
          resid.array() -= d;
          max_delta = std::max(max_delta, std::abs(d));
        }
      }
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const double aj = colnorm[j];
        if (aj <= 0.0) continue;
        const double gj = xv.col(j).dot(resid) * inv_n + aj * beta[j];
        double bnew = penalized[static_cast<std::size_t>(j)]
                          ? soft_threshold(gj, lambda) / aj
                          : gj / aj;
        const double d = bnew - beta[j];
        if (d != 0.0) {
          resid -= d * x.col(j);
          beta[j] = bnew;
          max_delta = std::max(max_delta, std::abs(d) * std::sqrt(aj));
        }
      }
      if (max_delta < tol) break;
    }
    // KKT pass over all columns; add violators to the active set
    bool violation = false;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (active[static_cast<std::size_t>(j)] || !usable[static_cast<std::size_t>(j)])
        continue;
      const double gj = xv.col(j).dot(resid) * inv_n;
      if (std::abs(gj) > lambda + 0.1 * tol) {
        active[static_cast<std::size_t>(j)] = true;
        violation = true;
      }
    }
    if (!violation) break;
  }
}

// Coordinate descent on a fixed quadratic model held as a gram matrix
// ("covariance updates"): every gradient, KKT check, and active-set Newton
// step costs O(p) or O(k^2) instead of O(n p). Columns are weighted-centered
// so the intercept decouples; `diag` is the constant diagonal of G on usable
// columns (1 for gaussian, 1/4 for the logistic majorizer).
void cd_solve_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& q,
                   const std::vector<bool>& penalized, const std::vector<bool>& usable,
                   double lambda, double tol, double diag, Eigen::VectorXd& beta,
                   Eigen::VectorXd& grad) {
  const Eigen::Index p = G.rows();

  std::vector<bool> active(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j)
    if (usable[static_cast<std::size_t>(j)] &&
        (beta[j] != 0.0 || !penalized[static_cast<std::size_t>(j)]))
      active[static_cast<std::size_t>(j)] = true;

  // active-set QP step: solve the fixed-sign KKT system on the nonzero set,
  // line-search to the first sign crossing, drop that coordinate, repeat. A
  // tiny ridge guards against exactly collinear basis columns; every partial
  // step moves toward the restricted minimizer, so the objective is monotone.
  auto try_accelerate = [&]() {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j)
      if (active[static_cast<std::size_t>(j)] && usable[static_cast<std::size_t>(j)] &&
          (beta[j] != 0.0 || !penalized[static_cast<std::size_t>(j)]))
        cols.push_back(j);
    for (int pass = 0; pass < 40; ++pass) {
      const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
      if (k == 0) return;
      Eigen::MatrixXd Gs(k, k);
      Eigen::VectorXd qs(k), sgn(k), cur(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) Gs(a, b) = G(cols[a], cols[b]);
        Gs(a, a) += 1e-10;
        qs[a] = q[cols[a]];
        cur[a] = beta[cols[a]];
        sgn[a] = penalized[static_cast<std::size_t>(cols[a])] && beta[cols[a]] != 0.0
                     ? (beta[cols[a]] > 0.0 ? 1.0 : -1.0)
                     : 0.0;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Gs);
      if (ldlt.info() != Eigen::Success) return;
      Eigen::VectorXd cand = ldlt.solve(qs - lambda * sgn);
      if (!cand.allFinite()) return;
      // largest step that keeps every penalized coordinate on its sign
      double t = 1.0;
      Eigen::Index crossing = -1;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (sgn[a] == 0.0) continue;
        if (cand[a] * sgn[a] < 0.0) {
          const double ta = cur[a] / (cur[a] - cand[a]);
          if (ta < t) {
            t = ta;
            crossing = a;
          }
        }
      }
      if (!(t > 0.0)) return;
      for (Eigen::Index a = 0; a < k; ++a) {
        double bnew = cur[a] + t * (cand[a] - cur[a]);
        if (a == crossing) bnew = 0.0;
        const double d = bnew - beta[cols[a]];
        if (d != 0.0) {
          grad -= d * G.col(cols[a]);
          beta[cols[a]] = bnew;
        }
      }
      if (crossing < 0) return;  // full step taken: restricted optimum reached
      cols.erase(cols.begin() + crossing);
    }
  };

  constexpr int kMaxSweeps = 10000;
  for (;;) {
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      if (sweep == 3 || sweep == 10 || sweep == 30 || sweep == 100 || sweep == 300 ||
          sweep == 1000 || sweep == 3000)
        try_accelerate();
      double max_delta = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const double gj = grad[j] + diag * beta[j];
        const double bnew =
            (penalized[static_cast<std::size_t>(j)] ? soft_threshold(gj, lambda) : gj) /
            diag;
        const double d = bnew - beta[j];
        if (d != 0.0) {
          grad -= d * G.col(j);
          beta[j] = bnew;
          max_delta = std::max(max_delta, std::abs(d) * std::sqrt(diag));
        }
      }
      if (max_delta < tol) break;
    }
    bool violation = false;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (active[static_cast<std::size_t>(j)] || !usable[static_cast<std::size_t>(j)])
        continue;
      if (std::abs(grad[j]) > lambda + 0.1 * tol) {
        active[static_cast<std::size_t>(j)] = true;
        violation = true;
      }
    }
    if (!violation) break;
  }
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                        const std::vector<int>& unpenalized, const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows();
  auto st = standardize(X, weights);
  std::vector<bool> penalized(static_cast<std::size_t>(X.cols()), true);
  for (int j : unpenalized) penalized[static_cast<std::size_t>(j)] = false;

  // residual after intercept + unpenalized columns
  Eigen::VectorXd resid;
  if (unpenalized.empty()) {
    const double mu0 = st.w.dot(y) / static_cast<double>(n);
    resid = y.array() - mu0;
    if (family == Family::binomial) resid = y.array() - mu0;  // score at the null fit
  } else {
    Eigen::MatrixXd Xu(n, static_cast<Eigen::Index>(unpenalized.size()) + 1);
    Xu.col(0).setOnes();
    for (std::size_t k = 0; k < unpenalized.size(); ++k)
      Xu.col(static_cast<Eigen::Index>(k) + 1) = st.x.col(unpenalized[k]);
    if (family == Family::gaussian) {
      auto fit = fit_linear(Xu, y, nullptr, &st.w);
      resid = y - Xu * fit.coef;
    } else {
      auto fit = fit_logistic(Xu, y, nullptr, &st.w);
      Eigen::VectorXd eta = Xu * fit.coef;
      resid = y - eta.unaryExpr([](double e) { return expit(e); });
    }
  }
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!penalized[static_cast<std::size_t>(j)] || st.scale[j] == 0.0) continue;
    const double g = std::abs((st.x.col(j).cwiseProduct(st.w)).dot(resid)) /
                     static_cast<double>(n);
    lmax = std::max(lmax, g);
  }
  return lmax;
}

std::vector<double> lambda_path(double lambda_max, int n_points, double min_ratio) {
  std::vector<double> path(static_cast<std::size_t>(n_points));
  const double l0 = std::log(lambda_max);
  const double l1 = std::log(lambda_max * min_ratio);
  for (int k = 0; k < n_points; ++k)
    path[static_cast<std::size_t>(k)] =
        std::exp(l0 + (l1 - l0) * static_cast<double>(k) / (n_points - 1));
  return path;
}

LassoPath fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<double>& lambdas, Family family,
                    const std::vector<int>& unpenalized, const Eigen::VectorXd* weights,
                    double tol) {
  if (lambdas.empty()) throw std::invalid_argument("fit_lasso: empty lambda path");
  for (std::size_t k = 1; k < lambdas.size(); ++k)
    if (!(lambdas[k] < lambdas[k - 1]))
      throw std::invalid_argument("fit_lasso: lambda path must be strictly decreasing");

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  auto st = standardize(X, weights);
  std::vector<bool> penalized(static_cast<std::size_t>(p), true);
  for (int j : unpenalized) penalized[static_cast<std::size_t>(j)] = false;
  std::vector<bool> usable(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) usable[static_cast<std::size_t>(j)] = st.scale[j] > 0.0;

  LassoPath path;
  path.lambdas = lambdas;

  // the sweep stopping rule leaves a path-dependent gap an order or two above
  // the step size, so solve tighter than the advertised KKT tolerance to keep
  // warm- and cold-started solutions within 1e-6 of each other
  const double cd_tol = 1e-2 * tol;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double b0 = family == Family::gaussian
                  ? st.w.dot(y) / static_cast<double>(n)
                  : logit(std::min(1.0 - 1e-10,
                                   std::max(1e-10, st.w.dot(y) / static_cast<double>(n))));

  // gaussian: the quadratic weights are fixed along the whole path, so one
  // gram serves every lambda ("covariance updates")
  Eigen::MatrixXd G;
  Eigen::VectorXd q, grad;
  if (family == Family::gaussian) {
    const Eigen::MatrixXd xw = st.x.array().colwise() * st.w.array();
    G.noalias() = st.x.transpose() * xw;
    G /= static_cast<double>(n);
    q = xw.transpose() * y / static_cast<double>(n);
    grad = q;  // beta starts at zero
  }

  for (double lambda : lambdas) {
    if (family == Family::gaussian) {
      cd_solve_gram(G, q, penalized, usable, lambda, cd_tol, 1.0, beta, grad);
    } else {
      // outer IRLS loop around the penalized WLS subproblem; converges on a
      // coefficient fixed point or a penalized-deviance plateau (saturated
      // fits drift in coefficient space while the objective stays flat)
      constexpr int kMaxOuter = 50;
      bool outer_converged = false;
      double obj_prev = std::numeric_limits<double>::infinity();
      for (int outer = 0; outer < kMaxOuter; ++outer) {
        Eigen::VectorXd eta = st.x * beta;
        eta.array() += b0;
        Eigen::VectorXd mu(n), v(n), z(n);
        double nll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          mu[i] = std::min(1.0 - 1e-9, std::max(1e-9, expit(eta[i])));
          const double vi = mu[i] * (1.0 - mu[i]);
          v[i] = st.w[i] * vi;
          z[i] = eta[i] + (y[i] - mu[i]) / vi;
          nll -= st.w[i] * (y[i] * std::log(mu[i]) + (1.0 - y[i]) * std::log(1.0 - mu[i]));
        }
        double obj = nll / static_cast<double>(n);
        for (Eigen::Index j = 0; j < p; ++j)
          if (penalized[static_cast<std::size_t>(j)]) obj += lambda * std::abs(beta[j]);
        if (std::abs(obj_prev - obj) < 1e-12 * (1.0 + std::abs(obj))) {
          outer_converged = true;
          break;
        }
        obj_prev = obj;
        Eigen::VectorXd beta_prev = beta;
        const double b0_prev = b0;
        Eigen::VectorXd resid = z - st.x * beta;
        resid.array() -= b0;
        cd_solve(st.x, v, penalized, usable, lambda, cd_tol, beta, b0, resid);
        const double delta =
            std::max((beta - beta_prev).cwiseAbs().maxCoeff(), std::abs(b0 - b0_prev));
        if (delta < 1e-9) {
          outer_converged = true;
          break;
        }
      }
      if (!outer_converged) path.converged = false;
    }
    // map back to the original column scale
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
    double intercept = b0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (st.scale[j] > 0.0) {
        coef[j] = beta[j] / st.scale[j];
        intercept -= coef[j] * st.mean[j];
      }
    }
    path.intercepts.push_back(intercept);
    path.coefs.push_back(coef);
    path.kkt_residuals.push_back(
        lasso_kkt_residual(X, y, intercept, coef, lambda, family, unpenalized, weights));
  }
  return path;
}

double lasso_kkt_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double intercept, const Eigen::VectorXd& beta, double lambda,
                          Family family, const std::vector<int>& unpenalized,
                          const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  auto st = standardize(X, weights);
  std::vector<bool> penalized(static_cast<std::size_t>(p), true);
  for (int j : unpenalized) penalized[static_cast<std::size_t>(j)] = false;

  Eigen::VectorXd eta = X * beta;
  eta.array() += intercept;
  Eigen::VectorXd resid(n);
  if (family == Family::gaussian)
    resid = y - eta;
  else
    resid = y - eta.unaryExpr([](double e) { return expit(e); });

  double viol = std::abs(st.w.dot(resid)) / static_cast<double>(n);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (st.scale[j] == 0.0) continue;
    const double g = (st.x.col(j).cwiseProduct(st.w)).dot(resid) / static_cast<double>(n);
    const double bj = beta[j] * st.scale[j];  // standardized-scale coefficient
    double vj;
    if (!penalized[static_cast<std::size_t>(j)])
      vj = std::abs(g);
    else if (bj != 0.0)
      vj = std::abs(g - lambda * (bj > 0 ? 1.0 : -1.0));
    else
      vj = std::max(0.0, std::abs(g) - lambda);
    viol = std::max(viol, vj);
  }
  return viol;
}

}  // namespace sgtmle
