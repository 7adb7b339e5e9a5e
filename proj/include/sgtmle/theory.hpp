#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sgtmle {

// Fully enumerable distribution over (S, W, A, Y) with binary S, A, Y and W on
// a finite grid. g is the treatment probability (constant by randomization),
// q(s)(w, a) = P(Y = 1 | S = s, W = w, A = a).
struct DiscreteToy {
  std::vector<double> w_values;     // <= 8 support points
  double p_s1 = 0.5;                // P(S = 1)
  std::vector<double> pw1;          // P(W = w | S = 1)
  std::vector<double> pw0;          // P(W = w | S = 0)
  double g1 = 0.5;                  // P(A = 1)
  Eigen::MatrixXd q1;               // |W| x 2, outcome risk given S = 1
  Eigen::MatrixXd q0;               // |W| x 2, outcome risk given S = 0

  void check() const;               // throws on malformed inputs
};

double toy_psi(const DiscreteToy& p);

// D_{Psi,P}(o) from the Lemma-1 canonical gradient.
double toy_eic(const DiscreteToy& p, int s, int w, int a, int y);

// E_{P0}[f(O)] by exact enumeration.
template <typename F>
double toy_expectation(const DiscreteToy& p0, F&& f) {
  double total = 0.0;
  const auto nw = p0.w_values.size();
  for (int s = 0; s <= 1; ++s) {
    const double ps = s == 1 ? p0.p_s1 : 1.0 - p0.p_s1;
    const auto& pw = s == 1 ? p0.pw1 : p0.pw0;
    const auto& q = s == 1 ? p0.q1 : p0.q0;
    for (std::size_t w = 0; w < nw; ++w)
      for (int a = 0; a <= 1; ++a) {
        const double pa = a == 1 ? p0.g1 : 1.0 - p0.g1;
        const double qy = q(static_cast<Eigen::Index>(w), a);
        for (int y = 0; y <= 1; ++y) {
          const double prob = ps * pw[w] * pa * (y == 1 ? qy : 1.0 - qy);
          total += prob * f(s, static_cast<int>(w), a, y);
        }
      }
  }
  return total;
}

struct TheoryReport {
  double mean_zero_error = 0.0;       // |E0 D_{Psi,P0}|
  double lemma2_error = 0.0;          // ratio-remainder identity residual
  double known_g_error = 0.0;         // numerator-remainder collapse residual
  bool pass = false;                  // all three <= 1e-12
};

// (a) E0 D_{Psi,P0} = 0; (b) R_Phi = (1/p_P) R_N + ((p_P - p0)/p_P)(Phi(P) -
// Phi(P0)) for the perturbed P; (c) with g_P = g0 the remainder of Psi reduces
// to ((p_P - p0)/p_P)(Psi(P) - Psi(P0)).
TheoryReport theory_checks(const DiscreteToy& p0, const DiscreteToy& p);

}  // namespace sgtmle
