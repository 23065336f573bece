#pragma once

// Independent reference implementations used as test oracles. These must not
// call into the library paths they are checking.

#include <algorithm>
#include <armadillo>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Standard normal pdf.
inline double phi(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Adaptive Simpson quadrature.
inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-14) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

// Phi by quadrature of the density from 0, plus the 1/2 mass below zero.
inline double normal_cdf_quadrature(double x) {
  if (x == 0.0) return 0.5;
  if (x > 0.0) return 0.5 + integrate(phi, 0.0, x);
  return 0.5 - integrate(phi, x, 0.0);
}

// One-sample Kolmogorov-Smirnov statistic against a cdf.
inline double ks_statistic(std::vector<double> draws,
                           const std::function<double(double)>& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double F = cdf(draws[i]);
    d = std::max(d, std::fabs(F - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - F));
  }
  return d;
}

// Critical value of the KS statistic at significance alpha (asymptotic).
inline double ks_critical(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) /
         std::sqrt(static_cast<double>(n));
}

// Naive WAIC from a draws x respondents log-likelihood matrix; written
// independently of the library implementation (plain loops, direct
// mean/exp/log, two-pass variance).
struct NaiveWaic {
  double waic, lppd, p_waic;
};

inline NaiveWaic naive_waic(const arma::mat& ll) {
  const arma::uword S = ll.n_rows, N = ll.n_cols;
  double lppd = 0.0, p = 0.0;
  for (arma::uword n = 0; n < N; ++n) {
    long double mean_exp = 0.0L;
    for (arma::uword s = 0; s < S; ++s) mean_exp += std::exp((long double)ll(s, n));
    mean_exp /= S;
    lppd += static_cast<double>(std::log(mean_exp));
    double m = 0.0;
    for (arma::uword s = 0; s < S; ++s) m += ll(s, n);
    m /= S;
    double v = 0.0;
    for (arma::uword s = 0; s < S; ++s) v += (ll(s, n) - m) * (ll(s, n) - m);
    v = (S > 1) ? v / (S - 1) : 0.0;
    p += v;
  }
  return {-2.0 * (lppd - p), lppd, p};
}

}  // namespace oracle
