#include "lrlcm/sampler.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "lrlcm/dist.hpp"

namespace lrlcm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* MwgSampler::sweep_order_string() {
  return "per-item[kappa_ystar,delta_beta]; alpha cells (t,n,k); gamma per k; "
         "sigma_zeta; omega; missing_y";
}

MwgSampler::MwgSampler(const Dataset& data, const ModelSpec& spec,
                       const ChainConfig& config)
    : data_(data), spec_(spec), cfg_(config), rng_(config.seed, 0) {
  validate_dataset(data_, spec_);
  if (cfg_.burn_in < 0 || cfg_.post_burn_in <= 0 || cfg_.thin < 1)
    throw std::invalid_argument("ChainConfig: invalid chain lengths");
}

void MwgSampler::init() {
  const int N = data_.N(), T = data_.T(), J = spec_.J(), K = spec_.K();
  const int H = spec_.H(), L = spec_.L();

  state_.meas.beta = arma::mat(H, J, arma::fill::zeros);
  state_.meas.delta = arma::umat(H, J, arma::fill::zeros);
  state_.meas.delta.row(0).ones();
  state_.meas.omega = 0.5;
  state_.meas.kappa.assign(J, arma::vec());
  for (int j = 0; j < J; ++j) {
    const int Mj = spec_.M()[j];
    arma::vec kap(Mj + 1);
    kap[0] = -kInf;
    kap[1] = 0.0;
    kap[Mj] = kInf;
    for (int l = 2; l < Mj; ++l)
      kap[l] = 3.0 * (l - 1) / static_cast<double>(Mj - 2);
    state_.meas.kappa[j] = kap;
  }

  state_.expa.Sigma = arma::eye(K, K);
  state_.expa.zeta_t = arma::mat(spec_.D() + spec_.H_otr(), K, arma::fill::zeros);
  state_.expa.gamma_t.set_size(K, L + 1);
  for (int k = 0; k < K; ++k) {
    state_.expa.gamma_t(k, 0) = -kInf;
    state_.expa.gamma_t(k, 1) = 0.0;
    state_.expa.gamma_t(k, L) = kInf;
    for (int l = 2; l < L; ++l)
      state_.expa.gamma_t(k, l) = 2.0 * (l - 1) / static_cast<double>(L - 2);
  }

  state_.alpha.set_size(N, T, K);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < K; ++k)
        state_.alpha(n, t, k) = static_cast<int>(rng_.uniform() * L);

  // Missing rows: first non-missing value after t for a respondent whose
  // first time point is missing, then the nearest preceding value.
  state_.y = data_.Y;
  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < T; ++t) {
      if (!data_.mask(n, t)) continue;
      int src = -1;
      if (t == 0) {
        for (int u = 1; u < T; ++u)
          if (!data_.mask(n, u)) { src = u; break; }
      } else {
        src = t - 1;  // already filled by this scan
      }
      for (int j = 0; j < J; ++j)
        state_.y(n, t, j) = (src >= 0) ? state_.y(n, src, j) : 0;
    }
  }

  // Augmented layers from their truncated full conditionals (beta = 0,
  // zeta~ = 0, Sigma = I at this point).
  state_.ystar.set_size(N, T, J);
  for (int j = 0; j < J; ++j) {
    const arma::vec& kap = state_.meas.kappa[j];
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t) {
        const int y = static_cast<int>(state_.y(n, t, j));
        state_.ystar(n, t, j) =
            sample_truncated_normal(0.0, 1.0, kap[y], kap[y + 1], rng_);
      }
  }
  state_.alpha_star.set_size(T * N, K);
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) {
        const int a = static_cast<int>(state_.alpha(n, t, k));
        state_.alpha_star(t * N + n, k) = sample_truncated_normal(
            0.0, 1.0, state_.expa.gamma_t(k, a), state_.expa.gamma_t(k, a + 1),
            rng_);
      }

  state_.kappa_accepts = arma::vec(J, arma::fill::zeros);
  state_.kappa_proposals = arma::vec(J, arma::fill::zeros);

  refresh_caches();
}

void MwgSampler::refresh_caches() {
  const int N = data_.N(), T = data_.T(), K = spec_.K();
  class_idx_.set_size(N, T);
  arma::ivec prof(K);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) prof[k] = state_.alpha(n, t, k);
      class_idx_(n, t) = spec_.class_of_profile(prof);
    }
  refresh_predictors();
  refresh_sigma_caches();
}

void MwgSampler::refresh_predictors() {
  pred_ = spec_.design_matrix() * state_.meas.beta;
}

void MwgSampler::refresh_sigma_caches() {
  const int N = data_.N(), T = data_.T(), K = spec_.K(), D = spec_.D();
  sigma_inv_ = arma::inv_sympd(arma::symmatu(state_.expa.Sigma));

  sigma_cond_var_.set_size(K);
  sigma_cond_coef_.set_size(K > 1 ? K - 1 : 0, K);
  for (int k = 0; k < K; ++k) {
    if (K == 1) {
      sigma_cond_var_[k] = state_.expa.Sigma(0, 0);
      continue;
    }
    arma::uvec others(K - 1);
    for (int i = 0, p = 0; i < K; ++i)
      if (i != k) others[p++] = i;
    const arma::uvec self = {static_cast<arma::uword>(k)};
    const arma::mat Soo = state_.expa.Sigma.submat(others, others);
    const arma::vec Sok = state_.expa.Sigma.submat(others, self);
    const arma::vec coef = arma::solve(arma::symmatu(Soo), Sok,
                                       arma::solve_opts::likely_sympd);
    sigma_cond_coef_.col(k) = coef;
    sigma_cond_var_[k] = state_.expa.Sigma(k, k) - arma::dot(Sok, coef);
  }

  // Covariate and transition-design parts of W zeta~.
  xlam_.set_size(T * N, K);
  if (D > 0) {
    const arma::mat lam_t = state_.expa.zeta_t.rows(0, D - 1);
    arma::rowvec x(D);
    for (int t = 0; t < T; ++t)
      for (int n = 0; n < N; ++n) {
        for (int d = 0; d < D; ++d) x[d] = data_.X(n, t, d);
        xlam_.row(t * N + n) = x * lam_t;
      }
  } else {
    xlam_.zeros();
  }
  zotr_ = spec_.design_matrix_otr() *
          state_.expa.zeta_t.rows(D, state_.expa.zeta_t.n_rows - 1);
}

bool MwgSampler::step_kappa_ystar(int j) {
  const int N = data_.N(), T = data_.T(), C = spec_.n_classes();
  const int Mj = spec_.M()[j];
  arma::vec& kap = state_.meas.kappa[j];
  bool accepted = true;

  // Cells grouped by (latent class, category): the acceptance ratio and the
  // refresh bounds only depend on the cell through this pair.
  arma::mat cnt(C, Mj, arma::fill::zeros);
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n)
      cnt(class_idx_(n, t), state_.y(n, t, j)) += 1.0;

  if (Mj >= 3) {
    const double sk = std::sqrt(cfg_.sigma_kappa2);
    arma::vec prop = kap;
    for (int l = 2; l < Mj; ++l)
      prop[l] = sample_truncated_normal(kap[l], cfg_.sigma_kappa2, prop[l - 1],
                                        kap[l + 1], rng_);

    double logr = 0.0;
    bool reversible = true;
    for (int l = 2; l < Mj; ++l) {
      // Reverse window (kappa_{l-1}, prop_{l+1}) must contain kappa_l.
      if (!(kap[l] < prop[l + 1])) { reversible = false; break; }
      logr += log_normal_cdf_interval((prop[l - 1] - kap[l]) / sk,
                                      (kap[l + 1] - kap[l]) / sk);
      logr -= log_normal_cdf_interval((kap[l - 1] - prop[l]) / sk,
                                      (prop[l + 1] - prop[l]) / sk);
    }
    if (reversible) {
      for (int c = 0; c < C; ++c) {
        const double s = pred_(c, j);
        for (int m = 0; m < Mj; ++m) {
          // Windows not bordered by a free threshold cancel in the ratio.
          const bool lower_free = m >= 2;
          const bool upper_free = m + 1 >= 2 && m + 1 <= Mj - 1;
          if (!lower_free && !upper_free) continue;
          if (cnt(c, m) == 0.0) continue;
          logr += cnt(c, m) *
                  (log_normal_cdf_interval(prop[m] - s, prop[m + 1] - s) -
                   log_normal_cdf_interval(kap[m] - s, kap[m + 1] - s));
        }
      }
      accepted = std::log(rng_.uniform()) <= logr;
    } else {
      accepted = false;
    }
    if (accepted) kap = prop;
    state_.kappa_proposals[j] += 1.0;
    state_.kappa_accepts[j] += accepted ? 1.0 : 0.0;
  }

  // Refresh the augmented responses under the (possibly new) thresholds,
  // sharing the cdf bounds across each (class, category) bucket.
  arma::mat plo(C, Mj), phi(C, Mj);
  arma::umat central(C, Mj, arma::fill::zeros);
  for (int c = 0; c < C; ++c) {
    const double s = pred_(c, j);
    for (int m = 0; m < Mj; ++m) {
      if (cnt(c, m) == 0.0) continue;
      const double a = kap[m] - s, b = kap[m + 1] - s;
      if (a <= 5.0 && b >= -5.0) {  // far-tail windows keep the slow path
        central(c, m) = 1;
        plo(c, m) = normal_cdf(a);
        phi(c, m) = normal_cdf(b);
      }
    }
  }
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n) {
      const int c = class_idx_(n, t);
      const int m = static_cast<int>(state_.y(n, t, j));
      const double s = pred_(c, j);
      double x;
      if (central(c, m)) {
        const double u =
            plo(c, m) + rng_.uniform() * (phi(c, m) - plo(c, m));
        x = s + normal_quantile(std::min(std::max(u, 1e-300), 1.0 - 1e-16));
        if (x <= kap[m]) x = std::nextafter(kap[m], kInf);
        if (x > kap[m + 1]) x = kap[m + 1];
      } else {
        x = sample_truncated_normal(s, 1.0, kap[m], kap[m + 1], rng_);
      }
      state_.ystar(n, t, j) = x;
    }
  return accepted;
}

double MwgSampler::delta_activation_prob(int h, int j) const {
  // Collapsed Bernoulli probability; requires h != intercept.
  const int N = data_.N(), T = data_.T(), H = spec_.H();
  const arma::mat& Dmat = spec_.design_matrix();

  // Gram matrix and cross products over the current latent classes.
  arma::vec cnt(spec_.n_classes(), arma::fill::zeros);
  arma::vec ssum(spec_.n_classes(), arma::fill::zeros);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      cnt[class_idx_(n, t)] += 1.0;
      ssum[class_idx_(n, t)] += state_.ystar(n, t, j);
    }
  arma::mat G(H, H, arma::fill::zeros);
  arma::vec u(H, arma::fill::zeros);
  for (int c = 0; c < spec_.n_classes(); ++c) {
    if (cnt[c] == 0.0) continue;
    G += cnt[c] * Dmat.row(c).t() * Dmat.row(c);
    u += ssum[c] * Dmat.row(c).t();
  }

  const arma::vec beta_j = state_.meas.beta.col(j);
  const double c2sq = 1.0 / (G(h, h) + 1.0 / cfg_.sigma_beta2);
  const double c1 =
      c2sq * (u[h] - (arma::dot(G.row(h), beta_j) - G(h, h) * beta_j[h]));
  const double Lhj = monotone_truncation_point(h, beta_j, spec_);
  const double sb = std::sqrt(cfg_.sigma_beta2);
  const double c2 = std::sqrt(c2sq);

  const double logA = -log_normal_cdf(Lhj == -kInf ? kInf : -Lhj / sb) +
                      0.5 * std::log(c2sq / cfg_.sigma_beta2) +
                      0.5 * c1 * c1 / c2sq +
                      log_normal_cdf(Lhj == -kInf ? kInf : (c1 - Lhj) / c2);
  const double w = state_.meas.omega;
  if (w <= 0.0) return 0.0;
  if (w >= 1.0) return 1.0;
  const double logit = std::log(w) - std::log1p(-w) + logA;
  if (logit > 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

void MwgSampler::step_delta_beta(int j) {
  const int N = data_.N(), T = data_.T(), H = spec_.H();
  const arma::mat& Dmat = spec_.design_matrix();

  arma::vec cnt(spec_.n_classes(), arma::fill::zeros);
  arma::vec ssum(spec_.n_classes(), arma::fill::zeros);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      cnt[class_idx_(n, t)] += 1.0;
      ssum[class_idx_(n, t)] += state_.ystar(n, t, j);
    }
  arma::mat G(H, H, arma::fill::zeros);
  arma::vec u(H, arma::fill::zeros);
  for (int c = 0; c < spec_.n_classes(); ++c) {
    if (cnt[c] == 0.0) continue;
    G += cnt[c] * Dmat.row(c).t() * Dmat.row(c);
    u += ssum[c] * Dmat.row(c).t();
  }

  arma::vec beta_j = state_.meas.beta.col(j);
  const double sb = std::sqrt(cfg_.sigma_beta2);
  for (int h = 0; h < H; ++h) {
    const double c2sq = 1.0 / (G(h, h) + 1.0 / cfg_.sigma_beta2);
    const double c1 =
        c2sq * (u[h] - (arma::dot(G.row(h), beta_j) - G(h, h) * beta_j[h]));
    if (h == 0) {
      // Intercept: always active, unconstrained normal draw.
      beta_j[0] = c1 + std::sqrt(c2sq) * sample_normal(rng_);
      state_.meas.delta(0, j) = 1;
      continue;
    }
    const double Lhj = monotone_truncation_point(h, beta_j, spec_);
    const double c2 = std::sqrt(c2sq);
    const double logA = -log_normal_cdf(Lhj == -kInf ? kInf : -Lhj / sb) +
                        0.5 * std::log(c2sq / cfg_.sigma_beta2) +
                        0.5 * c1 * c1 / c2sq +
                        log_normal_cdf(Lhj == -kInf ? kInf : (c1 - Lhj) / c2);
    const double w = state_.meas.omega;
    double p;
    if (w <= 0.0) p = 0.0;
    else if (w >= 1.0) p = 1.0;
    else {
      const double logit = std::log(w) - std::log1p(-w) + logA;
      p = (logit > 0.0) ? 1.0 / (1.0 + std::exp(-logit))
                        : std::exp(logit) / (1.0 + std::exp(logit));
    }
    const bool active = rng_.uniform() < p;
    state_.meas.delta(h, j) = active ? 1 : 0;
    beta_j[h] = active ? sample_truncated_normal(c1, c2sq, Lhj, kInf, rng_) : 0.0;
  }
  state_.meas.beta.col(j) = beta_j;
  pred_.col(j) = Dmat * beta_j;
}

arma::vec MwgSampler::alpha_cell_weights(int n, int t, int k) {
  const int N = data_.N(), T = data_.T(), L = spec_.L(), J = spec_.J();
  const int K = spec_.K();
  const int row = t * N + n;
  const int cur = static_cast<int>(state_.alpha(n, t, k));
  int stride = 1;
  for (int kk = k + 1; kk < K; ++kk) stride *= L;
  const int base_class = class_idx_(n, t) - cur * stride;

  // Conditional mean of alpha*_{nk} given the other components at time t.
  arma::rowvec m = xlam_.row(row);
  if (t > 0) m += zotr_.row(class_idx_(n, t - 1));
  double mu = m[k];
  if (K > 1) {
    int p = 0;
    for (int kk = 0; kk < K; ++kk) {
      if (kk == k) continue;
      mu += sigma_cond_coef_(p, k) * (state_.alpha_star(row, kk) - m[kk]);
      ++p;
    }
  }
  const double sd = std::sqrt(sigma_cond_var_[k]);

  arma::vec logw(L);
  for (int l = 0; l < L; ++l) {
    const int cls = base_class + l * stride;
    double lw = 0.0;
    for (int j = 0; j < J; ++j) {
      const double r = state_.ystar(n, t, j) - pred_(cls, j);
      lw -= 0.5 * r * r;
    }
    const double lo = (state_.expa.gamma_t(k, l) - mu) / sd;
    const double hi = (state_.expa.gamma_t(k, l + 1) - mu) / sd;
    lw += log_normal_cdf_interval(lo, hi);
    if (t < T - 1) {
      arma::rowvec mnext = xlam_.row((t + 1) * N + n) + zotr_.row(cls);
      arma::rowvec rnext =
          state_.alpha_star.row((t + 1) * N + n) - mnext;
      lw -= 0.5 * arma::as_scalar(rnext * sigma_inv_ * rnext.t());
    }
    logw[l] = lw;
  }
  const double mx = logw.max();
  if (!std::isfinite(mx)) {
    std::ostringstream os;
    os << "step_alpha_cell: all level weights vanished at (n=" << n
       << ", t=" << t << ", k=" << k << ")";
    throw std::runtime_error(os.str());
  }
  arma::vec w = arma::exp(logw - mx);
  return w / arma::accu(w);
}

void MwgSampler::step_alpha_cell(int n, int t, int k) {
  const int N = data_.N(), L = spec_.L(), K = spec_.K();
  const arma::vec w = alpha_cell_weights(n, t, k);
  const int l = static_cast<int>(sample_categorical(w, rng_));

  const int row = t * N + n;
  const int cur = static_cast<int>(state_.alpha(n, t, k));
  int stride = 1;
  for (int kk = k + 1; kk < K; ++kk) stride *= L;
  state_.alpha(n, t, k) = l;
  class_idx_(n, t) += (l - cur) * stride;

  // Refresh alpha*_{nk} from its truncated conditional at the new level.
  arma::rowvec m = xlam_.row(row);
  if (t > 0) m += zotr_.row(class_idx_(n, t - 1));
  double mu = m[k];
  if (K > 1) {
    int p = 0;
    for (int kk = 0; kk < K; ++kk) {
      if (kk == k) continue;
      mu += sigma_cond_coef_(p, k) * (state_.alpha_star(row, kk) - m[kk]);
      ++p;
    }
  }
  state_.alpha_star(row, k) = sample_truncated_normal(
      mu, sigma_cond_var_[k], state_.expa.gamma_t(k, l),
      state_.expa.gamma_t(k, l + 1), rng_);
}

void MwgSampler::step_gamma(int k) {
  const int N = data_.N(), T = data_.T(), L = spec_.L();
  if (L == 2) return;
  arma::mat& g = state_.expa.gamma_t;

  // Extremes of alpha* per latent level for this attribute.
  arma::vec level_max(L, arma::fill::value(-kInf));
  arma::vec level_min(L, arma::fill::value(kInf));
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n) {
      const int a = static_cast<int>(state_.alpha(n, t, k));
      const double v = state_.alpha_star(t * N + n, k);
      level_max[a] = std::max(level_max[a], v);
      level_min[a] = std::min(level_min[a], v);
    }

  for (int l = 2; l < L; ++l) {
    const double lo = std::max(level_max[l - 1], g(k, l - 1));
    if (l < L - 1) {
      const double hi = std::min(level_min[l], g(k, l + 1));
      if (!(lo < hi))
        throw std::runtime_error("step_gamma: empty threshold window");
      g(k, l) = rng_.uniform(lo, hi);
    } else {
      const double hi = level_min[l];  // +inf when the level is unoccupied
      if (!(lo < hi))
        throw std::runtime_error("step_gamma: empty threshold window");
      g(k, l) = sample_trunc_exponential(cfg_.rate_a, lo, hi, rng_);
    }
  }
}

void MwgSampler::step_sigma_zeta() {
  const int N = data_.N(), T = data_.T(), K = spec_.K(), D = spec_.D();
  const int P = D + spec_.H_otr();

  // W rows stacked time-major to match alpha_star.
  arma::mat W(T * N, P);
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n) {
      const int row = t * N + n;
      for (int d = 0; d < D; ++d) W(row, d) = data_.X(n, t, d);
      if (t == 0)
        W.row(row).cols(D, P - 1).zeros();
      else
        W.row(row).cols(D, P - 1) =
            spec_.design_matrix_otr().row(class_idx_(n, t - 1));
    }

  const arma::mat A = W.t() * W + arma::eye(P, P);
  const arma::mat A_inv = arma::inv_sympd(arma::symmatu(A));
  const arma::mat L2hat = A_inv * (W.t() * state_.alpha_star);
  const arma::mat resid = state_.alpha_star - W * L2hat;
  const arma::mat S = resid.t() * resid + L2hat.t() * L2hat;

  const double dof = static_cast<double>(N) * T + cfg_.v0_or_default(K);
  state_.expa.Sigma =
      sample_inverse_wishart(arma::eye(K, K) + arma::symmatu(S), dof, rng_);
  state_.expa.zeta_t =
      sample_matrix_normal(L2hat, A_inv, state_.expa.Sigma, rng_);

  refresh_sigma_caches();
}

void MwgSampler::step_omega() {
  const double total = static_cast<double>(arma::accu(state_.meas.delta));
  const double HJ = static_cast<double>(spec_.H()) * spec_.J();
  state_.meas.omega =
      sample_beta(total + cfg_.omega0, HJ - total + cfg_.omega1, rng_);
}

void MwgSampler::step_missing_y() {
  const int N = data_.N(), T = data_.T(), J = spec_.J();
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      if (!data_.mask(n, t)) continue;
      const int cls = class_idx_(n, t);
      for (int j = 0; j < J; ++j) {
        const arma::vec& kap = state_.meas.kappa[j];
        const double s = pred_(cls, j);
        const int Mj = spec_.M()[j];
        arma::vec w(Mj);
        double prev = 0.0;
        for (int m = 0; m < Mj; ++m) {
          const double cur = normal_cdf(kap[m + 1] - s);
          w[m] = std::max(cur - prev, 0.0);
          prev = cur;
        }
        const int y = static_cast<int>(sample_categorical(w, rng_));
        state_.y(n, t, j) = y;
        state_.ystar(n, t, j) =
            sample_truncated_normal(s, 1.0, kap[y], kap[y + 1], rng_);
      }
    }
}

void MwgSampler::sweep() {
  const int N = data_.N(), T = data_.T(), K = spec_.K();
  for (int j = 0; j < spec_.J(); ++j) {
    step_kappa_ystar(j);
    step_delta_beta(j);
  }
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) step_alpha_cell(n, t, k);
  for (int k = 0; k < K; ++k) step_gamma(k);
  step_sigma_zeta();
  step_omega();
  step_missing_y();
}

double MwgSampler::conditional_loglik_row(int n) const {
  double total = 0.0;
  for (int t = 0; t < data_.T(); ++t) {
    if (data_.mask(n, t)) continue;  // observed-data likelihood only
    const int cls = class_idx_(n, t);
    for (int j = 0; j < spec_.J(); ++j) {
      const arma::vec& kap = state_.meas.kappa[j];
      const double s = pred_(cls, j);
      const int y = static_cast<int>(data_.Y(n, t, j));
      total += log_normal_cdf_interval(kap[y] - s, kap[y + 1] - s);
    }
  }
  return total;
}

namespace {

void check_invariants(const ChainState& st, const Dataset& data,
                      const ModelSpec& spec, int sweep_idx) {
  const int N = data.N(), T = data.T();
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < spec.J(); ++j) {
        const int y = static_cast<int>(st.y(n, t, j));
        const double ys = st.ystar(n, t, j);
        const arma::vec& kap = st.meas.kappa[j];
        if (!(ys > kap[y] && ys <= kap[y + 1]))
          throw std::runtime_error(
              "state invariant violated at sweep " + std::to_string(sweep_idx) +
              ": ystar outside its threshold window");
      }
      for (int k = 0; k < spec.K(); ++k) {
        const int a = static_cast<int>(st.alpha(n, t, k));
        const double as = st.alpha_star(t * N + n, k);
        if (!(as > st.expa.gamma_t(k, a) && as <= st.expa.gamma_t(k, a + 1)))
          throw std::runtime_error(
              "state invariant violated at sweep " + std::to_string(sweep_idx) +
              ": alpha_star outside its threshold window");
      }
    }
}

}  // namespace

Chain MwgSampler::run() {
  init();

  Chain chain;
  chain.K = spec_.K();
  chain.L = spec_.L();
  chain.D = spec_.D();
  chain.meas_order = spec_.meas_order();
  chain.trans_order = spec_.trans_order();
  chain.M = spec_.M();
  chain.N = data_.N();
  chain.T = data_.T();
  chain.config = cfg_;
  chain.sweep_order = sweep_order_string();
  chain.column_convention = ModelSpec::column_convention();

  const int S = cfg_.post_burn_in / cfg_.thin;
  const int H = spec_.H(), J = spec_.J(), K = spec_.K(), L = spec_.L();
  int kap_len = 0;
  for (int m : spec_.M()) kap_len += m + 1;
  chain.beta.set_size(S, H * J);
  chain.delta.set_size(S, H * J);
  chain.kappa.set_size(S, kap_len);
  chain.gamma.set_size(S, K * (L + 1));
  chain.lambda.set_size(S, spec_.D() * K);
  chain.xi.set_size(S, spec_.H_otr() * K);
  chain.R.set_size(S, K * K);
  chain.omega.set_size(S);
  chain.loglik.set_size(S, data_.N());

  int sweep_idx = 0;
  for (int i = 0; i < cfg_.burn_in; ++i, ++sweep_idx) {
    sweep();
    if (sweep_idx % 100 == 99) check_invariants(state_, data_, spec_, sweep_idx);
  }
  int rec = 0;
  for (int i = 0; i < cfg_.post_burn_in; ++i, ++sweep_idx) {
    sweep();
    if (sweep_idx % 100 == 99) check_invariants(state_, data_, spec_, sweep_idx);
    if ((i + 1) % cfg_.thin != 0 || rec >= S) continue;

    const StructuralParams orig = to_original_scale(state_.expa, spec_.D());
    chain.beta.row(rec) = arma::vectorise(state_.meas.beta).t();
    chain.delta.row(rec) =
        arma::conv_to<arma::rowvec>::from(arma::vectorise(state_.meas.delta));
    int off = 0;
    for (int j = 0; j < J; ++j) {
      const arma::vec& kap = state_.meas.kappa[j];
      for (arma::uword l = 0; l < kap.n_elem; ++l)
        chain.kappa(rec, off + l) = kap[l];
      off += static_cast<int>(kap.n_elem);
    }
    chain.gamma.row(rec) = arma::vectorise(orig.gamma).t();
    if (spec_.D() > 0)
      chain.lambda.row(rec) = arma::vectorise(orig.lambda).t();
    chain.xi.row(rec) = arma::vectorise(orig.xi).t();
    chain.R.row(rec) = arma::vectorise(orig.R).t();
    chain.omega[rec] = state_.meas.omega;
    for (int n = 0; n < data_.N(); ++n)
      chain.loglik(rec, n) = conditional_loglik_row(n);
    ++rec;
  }

  chain.kappa_accept_rate.set_size(J);
  for (int j = 0; j < J; ++j)
    chain.kappa_accept_rate[j] =
        state_.kappa_proposals[j] > 0.0
            ? state_.kappa_accepts[j] / state_.kappa_proposals[j]
            : std::numeric_limits<double>::quiet_NaN();
  return chain;
}

Chain run_chain(const Dataset& data, const ModelSpec& spec,
                const ChainConfig& config) {
  MwgSampler sampler(data, spec, config);
  return sampler.run();
}

// --- Chain reshaping -------------------------------------------------------

arma::mat Chain::beta_draw(int s) const {
  ModelSpec sp = spec();
  return arma::reshape(beta.row(s).t(), sp.H(), sp.J());
}

arma::umat Chain::delta_draw(int s) const {
  ModelSpec sp = spec();
  arma::mat d = arma::reshape(delta.row(s).t(), sp.H(), sp.J());
  arma::umat out(d.n_rows, d.n_cols);
  for (arma::uword i = 0; i < d.n_elem; ++i) out[i] = d[i] > 0.5 ? 1 : 0;
  return out;
}

std::vector<arma::vec> Chain::kappa_draw(int s) const {
  std::vector<arma::vec> out(M.size());
  int off = 0;
  for (std::size_t j = 0; j < M.size(); ++j) {
    out[j] = kappa.row(s).cols(off, off + M[j]).t();
    off += M[j] + 1;
  }
  return out;
}

arma::mat Chain::gamma_draw(int s) const {
  return arma::reshape(gamma.row(s).t(), K, L + 1);
}

arma::mat Chain::lambda_draw(int s) const {
  return arma::reshape(lambda.row(s).t(), D, K);
}

arma::mat Chain::xi_draw(int s) const {
  ModelSpec sp = spec();
  return arma::reshape(xi.row(s).t(), sp.H_otr(), K);
}

arma::mat Chain::R_draw(int s) const {
  return arma::reshape(R.row(s).t(), K, K);
}

}  // namespace lrlcm
