#include "lrlcm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lrlcm/dist.hpp"

namespace lrlcm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double conditional_loglik(const arma::imat& y_n, const arma::uvec& mask_n,
                          const arma::imat& alpha_n, const arma::mat& beta,
                          const std::vector<arma::vec>& kappa,
                          const ModelSpec& spec) {
  const int T = static_cast<int>(y_n.n_rows), J = static_cast<int>(y_n.n_cols);
  if (static_cast<int>(alpha_n.n_rows) != T ||
      static_cast<int>(alpha_n.n_cols) != spec.K())
    throw std::invalid_argument("conditional_loglik: alpha_n must be T x K");
  double total = 0.0;
  arma::ivec prof(spec.K());
  for (int t = 0; t < T; ++t) {
    if (t < static_cast<int>(mask_n.n_elem) && mask_n[t]) continue;
    for (int k = 0; k < spec.K(); ++k) prof[k] = alpha_n(t, k);
    const int cls = spec.class_of_profile(prof);
    for (int j = 0; j < J; ++j) {
      const double s = arma::dot(spec.design_matrix().row(cls), beta.col(j));
      const int y = static_cast<int>(y_n(t, j));
      total += log_normal_cdf_interval(kappa[j][y] - s, kappa[j][y + 1] - s);
    }
  }
  return total;
}

WaicResult waic(const arma::mat& loglik) {
  const arma::uword S = loglik.n_rows, N = loglik.n_cols;
  if (S == 0 || N == 0) throw std::invalid_argument("waic: empty matrix");
  if (!loglik.is_finite())
    throw std::invalid_argument("waic: non-finite log-likelihood entries");
  WaicResult out;
  for (arma::uword n = 0; n < N; ++n) {
    const arma::vec col = loglik.col(n);
    const double mx = col.max();
    out.lppd += mx + std::log(arma::accu(arma::exp(col - mx)) /
                              static_cast<double>(S));
    out.p_waic += (S > 1) ? arma::var(col) : 0.0;  // unbiased (S-1) divisor
  }
  out.waic = -2.0 * (out.lppd - out.p_waic);
  return out;
}

namespace {

// Bartlett lag-window estimate of the spectral density at frequency zero,
// bandwidth floor(sqrt(n)).
double spectral0(const arma::vec& x) {
  const int n = static_cast<int>(x.n_elem);
  const double mean = arma::mean(x);
  const int b = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += (x[i] - mean) * (x[i] - mean);
  s /= n;  // gamma_0
  for (int k = 1; k <= b && k < n; ++k) {
    double g = 0.0;
    for (int i = 0; i + k < n; ++i) g += (x[i] - mean) * (x[i + k] - mean);
    g /= n;
    s += 2.0 * (1.0 - static_cast<double>(k) / (b + 1)) * g;
  }
  return std::max(s, 1e-300);
}

}  // namespace

double geweke_z(const arma::vec& series, double frac_a, double frac_b) {
  const int n = static_cast<int>(series.n_elem);
  if (n < 100) throw std::invalid_argument("geweke_z: need at least 100 points");
  if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0))
    throw std::invalid_argument("geweke_z: windows must not overlap");
  if (series.max() == series.min())
    throw std::invalid_argument("geweke_z: series is constant");
  const int na = static_cast<int>(std::floor(frac_a * n));
  const int nb = static_cast<int>(std::floor(frac_b * n));
  const arma::vec a = series.subvec(0, na - 1);
  const arma::vec b = series.subvec(n - nb, n - 1);
  const double va = spectral0(a) / na;
  const double vb = spectral0(b) / nb;
  return (arma::mean(a) - arma::mean(b)) / std::sqrt(va + vb);
}

double iact(const arma::vec& series) {
  const int n = static_cast<int>(series.n_elem);
  if (n < 100) throw std::invalid_argument("iact: need at least 100 points");
  const double mean = arma::mean(series);
  double g0 = 0.0;
  for (int i = 0; i < n; ++i) g0 += (series[i] - mean) * (series[i] - mean);
  g0 /= n;
  if (!(g0 > 0.0)) throw std::invalid_argument("iact: series is constant");

  auto acorr = [&](int k) {
    double g = 0.0;
    for (int i = 0; i + k < n; ++i) g += (series[i] - mean) * (series[i + k] - mean);
    return g / (n * g0);
  };

  // Geyer initial positive sequence: accumulate adjacent-lag pair sums
  // Gamma_m = rho_{2m} + rho_{2m+1} while they remain positive.
  double tau = -1.0;
  for (int m = 0;; ++m) {
    const int k0 = 2 * m, k1 = 2 * m + 1;
    if (k1 >= n) break;
    const double pair = (k0 == 0 ? 1.0 : acorr(k0)) + acorr(k1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1e-6);
}

double ess(const arma::vec& series) {
  return static_cast<double>(series.n_elem) / iact(series);
}

double quantile_type7(arma::vec v, double p) {
  if (v.n_elem == 0) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  if (v.n_elem == 1) return v[0];
  const double h = (static_cast<double>(v.n_elem) - 1.0) * p;
  const arma::uword lo = static_cast<arma::uword>(std::floor(h));
  const arma::uword hi = std::min(lo + 1, v.n_elem - 1);
  return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

arma::mat eta_of_draw(const Chain& chain, int s) {
  const ModelSpec spec = chain.spec();
  MeasurementParams m;
  m.beta = chain.beta_draw(s);
  m.kappa = chain.kappa_draw(s);
  m.delta = arma::umat(spec.H(), spec.J(), arma::fill::ones);
  return emissions_matrix(m, spec);
}

namespace {

ParamSummary summarize_matrix(const std::string& name, const arma::mat& draws,
                              double level) {
  ParamSummary out;
  out.name = name;
  const arma::uword P = draws.n_cols;
  out.mean.set_size(P);
  out.lo.set_size(P);
  out.hi.set_size(P);
  out.zero_in_ci.set_size(P);
  const double tail = 0.5 * (1.0 - level);
  for (arma::uword p = 0; p < P; ++p) {
    const arma::vec col = draws.col(p);
    out.mean[p] = arma::mean(col);
    out.lo[p] = quantile_type7(col, tail);
    out.hi[p] = quantile_type7(col, 1.0 - tail);
    out.zero_in_ci[p] = (out.lo[p] <= 0.0 && 0.0 <= out.hi[p]) ? 1 : 0;
  }
  return out;
}

}  // namespace

ChainSummary summarize_chain(const Chain& chain, double level) {
  if (chain.n_draws() < 1)
    throw std::invalid_argument("summarize_chain: empty chain");
  ChainSummary out;
  out.level = level;
  out.beta = summarize_matrix("beta", chain.beta, level);
  out.gamma = summarize_matrix("gamma", chain.gamma, level);
  out.lambda = summarize_matrix("lambda", chain.lambda, level);
  out.xi = summarize_matrix("xi", chain.xi, level);
  out.R = summarize_matrix("R", chain.R, level);

  arma::mat eta_draws(chain.n_draws(),
                      eta_of_draw(chain, 0).n_elem);
  for (int s = 0; s < chain.n_draws(); ++s)
    eta_draws.row(s) = arma::vectorise(eta_of_draw(chain, s)).t();
  out.eta = summarize_matrix("eta", eta_draws, level);

  out.delta_mean = arma::mean(chain.delta, 0).t();
  out.delta_mode.set_size(out.delta_mean.n_elem);
  for (arma::uword p = 0; p < out.delta_mean.n_elem; ++p)
    out.delta_mode[p] = out.delta_mean[p] > 0.5 ? 1 : 0;  // strict
  return out;
}

}  // namespace lrlcm
