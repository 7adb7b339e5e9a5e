#include "sgtmle/glm.hpp"

#include <cmath>

namespace sgtmle {

namespace {

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                      const Eigen::VectorXd* weights) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    // y*eta - log(1+exp(eta)), stable form
    const double e = eta[i];
    const double log1pexp = e > 30 ? e : std::log1p(std::exp(e));
    ll += w * (y[i] * e - log1pexp);
  }
  return ll;
}

}  // namespace

GlmFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd* offset, const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw std::invalid_argument("fit_logistic: rows(X) != len(y)");
  if (!offset) {
    const double ybar = weights ? (y.cwiseProduct(*weights)).sum() / weights->sum()
                                : y.mean();
    if (ybar <= 0.0 || ybar >= 1.0)
      throw std::invalid_argument("fit_logistic: outcome has no variation");
  }

  GlmFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta(n), mu(n), wirls(n), score(p);
  double ll_prev = -std::numeric_limits<double>::infinity();

  constexpr int kMaxIter = 100;
  constexpr double kScoreTol = 1e-10;
  constexpr double kLlTol = 1e-12;
  constexpr double kSeparationNorm = 1e3;
  constexpr double kEtaBound = 30.0;

  for (int it = 1; it <= kMaxIter; ++it) {
    fit.iterations = it;
    eta = X * fit.coef;
    if (offset) eta += *offset;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      const double v = mu[i] * (1.0 - mu[i]);
      wirls[i] = (weights ? (*weights)[i] : 1.0) * v;
    }
    Eigen::VectorXd resid = y - mu;
    if (weights) resid = resid.cwiseProduct(*weights);
    score = X.transpose() * resid;
    fit.max_score = score.cwiseAbs().maxCoeff();
    const double ll = log_likelihood(eta, y, weights);

    if (fit.max_score <= kScoreTol ||
        (it > 1 && std::abs(ll - ll_prev) <= kLlTol * (std::abs(ll_prev) + 1.0))) {
      // separated data also drives the score to zero, but only with diverging
      // linear predictors on the X part of eta
      if ((eta - (offset ? *offset : Eigen::VectorXd::Zero(n))).cwiseAbs().maxCoeff() >
          kEtaBound)
        throw SeparationError("fit_logistic: fitted probabilities pinned at 0/1 "
                              "(perfect separation?)");
      fit.converged = true;
      return fit;
    }
    ll_prev = ll;

    Eigen::MatrixXd info = X.transpose() * wirls.asDiagonal() * X;
    // guard singular information with a tiny jitter
    const double jitter = 1e-12 * (info.trace() / static_cast<double>(p) + 1.0);
    info.diagonal().array() += jitter;
    Eigen::VectorXd step = info.ldlt().solve(score);
    fit.coef += step;

    if (fit.coef.norm() > kSeparationNorm)
      throw SeparationError("fit_logistic: diverging coefficients (perfect separation?)");
  }
  return fit;  // converged stays false; caller decides the fallback
}

GlmFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd* offset, const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw std::invalid_argument("fit_linear: rows(X) != len(y)");
  Eigen::VectorXd target = offset ? (y - *offset).eval() : y;
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  if (weights) {
    xtx = X.transpose() * weights->asDiagonal() * X;
    xty = X.transpose() * weights->cwiseProduct(target);
  } else {
    xtx = X.transpose() * X;
    xty = X.transpose() * target;
  }
  const double jitter = 1e-12 * (xtx.trace() / static_cast<double>(p) + 1.0);
  xtx.diagonal().array() += jitter;
  GlmFit fit;
  fit.coef = xtx.ldlt().solve(xty);
  fit.converged = true;
  fit.iterations = 1;
  Eigen::VectorXd resid = target - X * fit.coef;
  if (weights) resid = resid.cwiseProduct(*weights);
  fit.max_score = (X.transpose() * resid).cwiseAbs().maxCoeff();
  return fit;
}

}  // namespace sgtmle
