#include "sgtmle/theory.hpp"

#include <cmath>
#include <stdexcept>

namespace sgtmle {

void DiscreteToy::check() const {
  const auto nw = w_values.size();
  if (nw == 0 || nw > 8) throw std::invalid_argument("DiscreteToy: need 1..8 support points");
  if (pw1.size() != nw || pw0.size() != nw ||
      q1.rows() != static_cast<Eigen::Index>(nw) || q0.rows() != static_cast<Eigen::Index>(nw) ||
      q1.cols() != 2 || q0.cols() != 2)
    throw std::invalid_argument("DiscreteToy: dimension mismatch");
  if (!(p_s1 > 0.0 && p_s1 < 1.0)) throw std::invalid_argument("DiscreteToy: p_s1 not in (0,1)");
  if (!(g1 > 0.0 && g1 < 1.0)) throw std::invalid_argument("DiscreteToy: g1 not in (0,1)");
  double s1 = 0.0, s0 = 0.0;
  for (std::size_t w = 0; w < nw; ++w) {
    if (pw1[w] < 0.0 || pw0[w] < 0.0)
      throw std::invalid_argument("DiscreteToy: negative mass");
    s1 += pw1[w];
    s0 += pw0[w];
  }
  if (std::abs(s1 - 1.0) > 1e-12 || std::abs(s0 - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteToy: conditional W laws must sum to 1");
  if (q1.minCoeff() < 0.0 || q1.maxCoeff() > 1.0 || q0.minCoeff() < 0.0 || q0.maxCoeff() > 1.0)
    throw std::invalid_argument("DiscreteToy: risks outside [0,1]");
}

double toy_psi(const DiscreteToy& p) {
  double psi = 0.0;
  for (std::size_t w = 0; w < p.w_values.size(); ++w)
    psi += p.pw1[w] * (p.q1(static_cast<Eigen::Index>(w), 1) -
                       p.q1(static_cast<Eigen::Index>(w), 0));
  return psi;
}

double toy_eic(const DiscreteToy& p, int s, int w, int a, int y) {
  if (s == 0) return 0.0;
  const auto wi = static_cast<Eigen::Index>(w);
  const double m = p.q1(wi, 1) - p.q1(wi, 0);
  const double hw = a == 1 ? 1.0 / p.g1 : -1.0 / (1.0 - p.g1);
  return (m - toy_psi(p)) / p.p_s1 + hw * (y - p.q1(wi, a)) / p.p_s1;
}

namespace {

// canonical gradient of the numerator N(P) = E_P[S m_P(W)]
double toy_eic_numerator(const DiscreteToy& p, double n_p, int s, int w, int a, int y) {
  if (s == 0) return -n_p;
  const auto wi = static_cast<Eigen::Index>(w);
  const double m = p.q1(wi, 1) - p.q1(wi, 0);
  const double hw = a == 1 ? 1.0 / p.g1 : -1.0 / (1.0 - p.g1);
  return m - n_p + hw * (y - p.q1(wi, a));
}

}  // namespace

TheoryReport theory_checks(const DiscreteToy& p0, const DiscreteToy& p) {
  p0.check();
  p.check();
  if (p.w_values != p0.w_values)
    throw std::invalid_argument("theory_checks: P and P0 must share the W grid");

  TheoryReport report;

  // (a) mean-zero property at the truth
  report.mean_zero_error = std::abs(
      toy_expectation(p0, [&](int s, int w, int a, int y) { return toy_eic(p0, s, w, a, y); }));

  const double psi_p = toy_psi(p);
  const double psi_0 = toy_psi(p0);
  const double n_p = p.p_s1 * psi_p;
  const double n_0 = p0.p_s1 * psi_0;

  // (b) Lemma-2 ratio-remainder identity with h_P = m_P, so Phi_h = Psi
  const double e0_dn = toy_expectation(
      p0, [&](int s, int w, int a, int y) { return toy_eic_numerator(p, n_p, s, w, a, y); });
  const double r_n = n_p - n_0 + e0_dn;
  const double e0_dphi = toy_expectation(p0, [&](int s, int w, int a, int y) {
    return (toy_eic_numerator(p, n_p, s, w, a, y) - psi_p * (s - p.p_s1)) / p.p_s1;
  });
  const double r_phi = psi_p - psi_0 + e0_dphi;
  const double rhs = r_n / p.p_s1 + (p.p_s1 - p0.p_s1) / p.p_s1 * (psi_p - psi_0);
  report.lemma2_error = std::abs(r_phi - rhs);

  // (c) with g_P = g_0 plugged in, the numerator remainder vanishes and only
  // the denominator term survives
  DiscreteToy pg = p;
  pg.g1 = p0.g1;
  const double psi_pg = toy_psi(pg);
  const double e0_d = toy_expectation(
      p0, [&](int s, int w, int a, int y) { return toy_eic(pg, s, w, a, y); });
  const double r_psi = psi_pg - psi_0 + e0_d;
  const double denom_term = (pg.p_s1 - p0.p_s1) / pg.p_s1 * (psi_pg - psi_0);
  report.known_g_error = std::abs(r_psi - denom_term);

  report.pass = report.mean_zero_error <= 1e-12 && report.lemma2_error <= 1e-12 &&
                report.known_g_error <= 1e-12;
  return report;
}

}  // namespace sgtmle
