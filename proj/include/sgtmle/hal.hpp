#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace sgtmle {

struct BasisSpec {
  int max_degree = 3;
  int smoothness = 1;   // 0 = indicator, 1 = hinge
  int num_knots = 20;   // per coordinate for singleton subspaces; see build_design
};

// Tensor-product spline basis over a coordinate subset. Binary coordinates are
// always indicator factors with knot 1 regardless of the smoothness order.
struct BasisFunction {
  std::vector<int> coords;
  std::vector<double> knots;
  std::vector<std::uint8_t> orders;  // per coordinate, 0 or 1

  double eval(const Eigen::RowVectorXd& x) const {
    double v = 1.0;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      const double z = x[coords[k]] - knots[k];
      if (orders[k] == 0) {
        if (z < 0.0) return 0.0;
      } else {
        if (z <= 0.0) return 0.0;
        v *= z;
      }
    }
    return v;
  }
};

struct HalDesign {
  Eigen::MatrixXd x;                        // n x J, no intercept column
  std::vector<BasisFunction> basis;         // J entries
  std::vector<int> group;                   // subspace index per column
  std::vector<std::vector<int>> subspaces;  // subspace index -> coordinate set
};

// All nonempty coordinate subsets of size <= m in (size, lexicographic) order.
std::vector<std::vector<int>> enumerate_subspaces(int d, int m);

// Knots are marginal empirical quantiles at probabilities (k+0.5)/K. For a
// subspace of c coordinates the per-coordinate knot count is reduced to
// floor(num_knots^(1/c)) so the column count per subspace stays near
// num_knots; binary coordinates always get the single knot 1. Duplicate and
// all-zero columns are collapsed.
HalDesign build_design(const Eigen::MatrixXd& cols, const BasisSpec& spec,
                       const std::vector<std::vector<int>>& subspaces);

struct GroupLassoOptions {
  int path_points = 30;
  double min_ratio = 1e-3;
  int max_supports = 10;
  double tol = 1e-6;
  int max_sweeps = 2000;
};

struct ScreenResult {
  // ranked candidate supports (lists of subspace indices), largest-lambda
  // first, deduplicated; the empty support is always the first entry
  std::vector<std::vector<int>> supports;
  bool converged = true;
};

// Weighted-gaussian group lasso over the design's subspace blocks with group
// weights sqrt(p_s); solved by proximal block coordinate descent. Subspaces in
// `unpenalized_groups` are never shrunk and appear in every support.
ScreenResult group_lasso_screen(const HalDesign& design, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weights,
                                const std::vector<int>& unpenalized_groups = {},
                                const GroupLassoOptions& opts = {});

// One path solution (exposed for the one-group closed-form oracle tests).
Eigen::VectorXd group_lasso_solve(const HalDesign& design, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& weights, double lambda,
                                  const std::vector<int>& unpenalized_groups = {},
                                  const GroupLassoOptions& opts = {});

struct HalModel {
  std::vector<BasisFunction> basis;
  Eigen::VectorXd beta;  // [intercept, basis coefficients...]
  std::vector<std::vector<int>> support;  // selected subspaces
  bool screen_converged = true;
  int selected_support = 0;

  // [1, phi_1(x), ..., phi_J(x)] rows
  Eigen::MatrixXd design_at(const Eigen::MatrixXd& pts) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& pts) const;
};

// Two-stage CATE working-model fit under the residualized squared-error loss:
// regress (y - nu)/r on the basis with weights r^2, where r = indicator - prob.
// Stage 1 screens subspaces by group lasso on a coarse basis; stage 2 refits a
// dense lasso per candidate support; K-fold CV picks the support, ties toward
// the smaller one. force_col >= 0 keeps that raw column's singleton subspace
// unpenalized and present in every candidate.
HalModel fit_cate_working_model(const Eigen::MatrixXd& cols, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& nu, const Eigen::VectorXd& prob,
                                const Eigen::VectorXd& indicator,
                                const BasisSpec& screen_spec, const BasisSpec& fit_spec,
                                int force_col, std::uint64_t seed, int cv_folds = 3);

}  // namespace sgtmle
