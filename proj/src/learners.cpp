#include "sgtmle/learners.hpp"

#include "sgtmle/glm.hpp"
#include "sgtmle/lasso.hpp"
#include "sgtmle/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sgtmle {

namespace {

bool learner_is_lasso(LearnerKind kind) {
  return kind == LearnerKind::LassoLogit || kind == LearnerKind::LassoLinear ||
         kind == LearnerKind::LassoLogitInt2 || kind == LearnerKind::LassoLinearInt2;
}

bool learner_pairwise(LearnerKind kind) {
  return kind == LearnerKind::LassoLogitInt2 || kind == LearnerKind::LassoLinearInt2;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(X.cols()) = X;
  return out;
}

double clamp_prob(double p) { return std::min(1.0 - 1e-12, std::max(1e-12, p)); }

// Mean cross-validated loss of `kind` over the provided fold split.
double candidate_cv_loss(LearnerKind kind, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y, const std::vector<int>& folds,
                         CvLoss loss) {
  const int k = *std::max_element(folds.begin(), folds.end()) + 1;
  const Eigen::Index n = X.rows();
  double total = 0.0;
  long count = 0;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i)
      (folds[static_cast<std::size_t>(i)] == fold ? test : train).push_back(i);
    if (train.empty() || test.empty()) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(train.size()), X.cols());
    Eigen::VectorXd ytr(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train[i]);
      ytr[static_cast<Eigen::Index>(i)] = y[train[i]];
    }
    Eigen::MatrixXd Xte(static_cast<Eigen::Index>(test.size()), X.cols());
    Eigen::VectorXd yte(static_cast<Eigen::Index>(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
      Xte.row(static_cast<Eigen::Index>(i)) = X.row(test[i]);
      yte[static_cast<Eigen::Index>(i)] = y[test[i]];
    }
    FitModel m = fit_learner(kind, Xtr, ytr, {});
    Eigen::VectorXd pred = m.predict(Xte);
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      if (loss == CvLoss::log_likelihood) {
        const double p = clamp_prob(pred[i]);
        total -= yte[i] * std::log(p) + (1.0 - yte[i]) * std::log(1.0 - p);
      } else {
        const double r = yte[i] - pred[i];
        total += r * r;
      }
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

LearnerKind learner_from_string(const std::string& id) {
  static const std::map<std::string, LearnerKind> table = {
      {"mean", LearnerKind::Mean},
      {"glm_logit", LearnerKind::GlmLogit},
      {"glm_linear", LearnerKind::GlmLinear},
      {"lasso_logit", LearnerKind::LassoLogit},
      {"lasso_linear", LearnerKind::LassoLinear},
      {"lasso_logit_int2", LearnerKind::LassoLogitInt2},
      {"lasso_linear_int2", LearnerKind::LassoLinearInt2},
  };
  auto it = table.find(id);
  if (it == table.end()) throw std::runtime_error("unknown learner id: " + id);
  return it->second;
}

std::string learner_to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::Mean: return "mean";
    case LearnerKind::GlmLogit: return "glm_logit";
    case LearnerKind::GlmLinear: return "glm_linear";
    case LearnerKind::LassoLogit: return "lasso_logit";
    case LearnerKind::LassoLinear: return "lasso_linear";
    case LearnerKind::LassoLogitInt2: return "lasso_logit_int2";
    case LearnerKind::LassoLinearInt2: return "lasso_linear_int2";
  }
  return "?";
}

bool learner_is_logistic(LearnerKind kind) {
  return kind == LearnerKind::GlmLogit || kind == LearnerKind::LassoLogit ||
         kind == LearnerKind::LassoLogitInt2;
}

Eigen::MatrixXd expand_pairwise(const Eigen::MatrixXd& X) {
  const Eigen::Index d = X.cols();
  Eigen::MatrixXd out(X.rows(), d + d * (d - 1) / 2);
  out.leftCols(d) = X;
  Eigen::Index c = d;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j)
      out.col(c++) = X.col(i).cwiseProduct(X.col(j));
  return out;
}

Eigen::VectorXd FitModel::predict(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd feats = pairwise ? expand_pairwise(X) : X;
  if (feats.cols() + 1 != coef.size())
    throw std::invalid_argument("FitModel::predict: feature dimension mismatch");
  Eigen::VectorXd eta = feats * coef.tail(coef.size() - 1);
  eta.array() += coef[0];
  Eigen::VectorXd out = eta;
  if (learner_is_logistic(kind) || kind == LearnerKind::Mean) {
    if (learner_is_logistic(kind))
      out = eta.unaryExpr([](double e) { return expit(e); });
  }
  if (trunc_delta) {
    const double d = *trunc_delta;
    out = out.unaryExpr([d](double p) { return std::min(1.0 - d, std::max(d, p)); });
  }
  return out;
}

FitModel fit_learner(LearnerKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const std::vector<int>& folds) {
  FitModel m;
  m.kind = kind;
  m.pairwise = learner_pairwise(kind);
  const Eigen::MatrixXd feats = m.pairwise ? expand_pairwise(X) : X;

  if (kind == LearnerKind::Mean) {
    m.coef = Eigen::VectorXd::Zero(feats.cols() + 1);
    m.coef[0] = y.mean();
    return m;
  }
  if (kind == LearnerKind::GlmLogit || kind == LearnerKind::GlmLinear) {
    const Eigen::MatrixXd design = with_intercept(feats);
    GlmFit fit = kind == LearnerKind::GlmLogit ? fit_logistic(design, y)
                                               : fit_linear(design, y);
    if (!fit.converged) throw std::runtime_error("GLM did not converge");
    m.coef = fit.coef;
    return m;
  }

  // lasso learners: lambda chosen by internal K-fold CV over a shared path
  const Family family = learner_is_logistic(kind) ? Family::binomial : Family::gaussian;
  const double lmax = lasso_lambda_max(feats, y, family);
  if (lmax <= 0.0) {  // no signal in any column
    m.coef = Eigen::VectorXd::Zero(feats.cols() + 1);
    m.coef[0] = family == Family::binomial
                    ? logit(std::min(1.0 - 1e-6, std::max(1e-6, y.mean())))
                    : y.mean();
    return m;
  }
  const auto path = lambda_path(lmax, 100, 1e-3);

  std::vector<int> cvfolds = folds;
  if (cvfolds.empty()) {
    // split keyed to row content so the fold assignment (and hence the selected
    // lambda) does not depend on the order the rows arrive in
    std::vector<std::pair<std::uint64_t, Eigen::Index>> keyed;
    keyed.reserve(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      std::uint64_t h = stream_seed(0, 0, "lasso-cv-key");
      auto mix = [&h](double v) {
        h ^= std::bit_cast<std::uint64_t>(v);
        h *= 1099511628211ull;
        h ^= h >> 29;
      };
      mix(y[i]);
      for (Eigen::Index j = 0; j < X.cols(); ++j) mix(X(i, j));
      keyed.emplace_back(h, i);
    }
    std::sort(keyed.begin(), keyed.end());
    cvfolds.resize(static_cast<std::size_t>(X.rows()));
    for (std::size_t r = 0; r < keyed.size(); ++r)
      cvfolds[static_cast<std::size_t>(keyed[r].second)] = static_cast<int>(r % 3);
  }
  const int k = *std::max_element(cvfolds.begin(), cvfolds.end()) + 1;
  std::vector<double> cv_loss(path.size(), 0.0);
  for (int fold = 0; fold < k; ++fold) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      (cvfolds[static_cast<std::size_t>(i)] == fold ? test : train).push_back(i);
    Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(train.size()), feats.cols());
    Eigen::VectorXd ytr(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = feats.row(train[i]);
      ytr[static_cast<Eigen::Index>(i)] = y[train[i]];
    }
    LassoPath lp = fit_lasso(Xtr, ytr, path, family);
    for (std::size_t l = 0; l < path.size(); ++l) {
      for (Eigen::Index idx : test) {
        double eta = lp.intercepts[l] + feats.row(idx).dot(lp.coefs[l]);
        if (family == Family::binomial) {
          const double p = clamp_prob(expit(eta));
          cv_loss[l] -= y[idx] * std::log(p) + (1.0 - y[idx]) * std::log(1.0 - p);
        } else {
          const double r = y[idx] - eta;
          cv_loss[l] += r * r;
        }
      }
    }
  }
  const std::size_t best =
      static_cast<std::size_t>(std::min_element(cv_loss.begin(), cv_loss.end()) -
                               cv_loss.begin());
  LassoPath full = fit_lasso(feats, y, path, family);
  m.coef.resize(feats.cols() + 1);
  m.coef[0] = full.intercepts[best];
  m.coef.tail(feats.cols()) = full.coefs[best];
  return m;
}

std::vector<int> stratified_folds(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                  int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_folds: K >= 2 required");
  const Eigen::Index n = s.size();
  std::vector<int> folds(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<Eigen::Index>> cells(4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int cell = (s[i] == 1.0 ? 2 : 0) + (a[i] == 1.0 ? 1 : 0);
    cells[static_cast<std::size_t>(cell)].push_back(i);
  }
  auto rng = make_rng(seed, 0, "cv-folds");
  for (auto& cell : cells) {
    std::shuffle(cell.begin(), cell.end(), rng);
    for (std::size_t i = 0; i < cell.size(); ++i)
      folds[static_cast<std::size_t>(cell[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return folds;
}

CvResult cv_select(const CvSelector& selector, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y, const std::vector<int>& folds) {
  if (selector.candidates.empty())
    throw std::invalid_argument("cv_select: no candidates");
  if (X.rows() < 2 * selector.folds)
    throw std::invalid_argument("cv_select: n < 2K");
  CvResult result;
  result.cv_losses.resize(selector.candidates.size(),
                          std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < selector.candidates.size(); ++c) {
    try {
      result.cv_losses[c] =
          candidate_cv_loss(selector.candidates[c], X, y, folds, selector.loss);
    } catch (const std::exception&) {
      // failing candidates never abort the selection
    }
  }
  result.selected = static_cast<int>(
      std::min_element(result.cv_losses.begin(), result.cv_losses.end()) -
      result.cv_losses.begin());
  result.model =
      fit_learner(selector.candidates[static_cast<std::size_t>(result.selected)], X, y, folds);
  return result;
}

double truncation_delta(long n) {
  const double delta = 5.0 / (std::sqrt(static_cast<double>(n)) * std::log(static_cast<double>(n)));
  if (delta >= 0.5)
    throw std::runtime_error("truncation rule 5/(sqrt(n) ln n) >= 0.5: n too small");
  return delta;
}

double truncate_probability(double p, long n) {
  const double delta = truncation_delta(n);
  return std::min(1.0 - delta, std::max(delta, p));
}

}  // namespace sgtmle
