#include <algorithm>
#include <armadillo>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "lrlcm/diagnostics.hpp"
#include "lrlcm/dist.hpp"
#include "lrlcm/model.hpp"
#include "lrlcm/rng.hpp"
#include "oracles.hpp"

using namespace lrlcm;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("conditional_loglik basics") {
  ModelSpec spec(1, 2, {2}, 1, 1, 1);
  arma::imat y(1, 1);
  y(0, 0) = 1;
  arma::uvec mask(1, arma::fill::zeros);
  arma::imat alpha(1, 1);
  alpha(0, 0) = 0;
  arma::mat beta(2, 1, arma::fill::zeros);
  std::vector<arma::vec> kappa = {arma::vec({-kInf, 0.0, kInf})};
  CHECK(conditional_loglik(y, mask, alpha, beta, kappa, spec) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));

  // Equals the sum of per-item log emission probabilities.
  ModelSpec spec2(2, 2, {3, 2}, 2, 1, 1);
  arma::imat y2(2, 2);
  y2 = {{2, 0}, {1, 1}};
  arma::uvec mask2(2, arma::fill::zeros);
  arma::imat alpha2 = {{1, 0}, {1, 1}};
  arma::mat beta2(spec2.H(), 2);
  beta2.col(0) = arma::vec({-0.3, 0.8, 0.5, 0.4});
  beta2.col(1) = arma::vec({0.2, 0.6, 0.0, 0.0});
  std::vector<arma::vec> kap2 = {arma::vec({-kInf, 0.0, 1.0, kInf}),
                                 arma::vec({-kInf, 0.0, kInf})};
  double manual = 0.0;
  for (int t = 0; t < 2; ++t) {
    arma::ivec prof = {alpha2(t, 0), alpha2(t, 1)};
    manual += std::log(emission_prob(static_cast<int>(y2(t, 0)), prof,
                                     beta2.col(0), kap2[0], spec2));
    manual += std::log(emission_prob(static_cast<int>(y2(t, 1)), prof,
                                     beta2.col(1), kap2[1], spec2));
  }
  CHECK(conditional_loglik(y2, mask2, alpha2, beta2, kap2, spec2) ==
        doctest::Approx(manual).epsilon(1e-12));

  // Masked rows are skipped.
  arma::uvec mask3 = {1, 0};
  arma::ivec prof1 = {alpha2(1, 0), alpha2(1, 1)};
  double row1 = std::log(emission_prob(1, prof1, beta2.col(0), kap2[0], spec2)) +
                std::log(emission_prob(1, prof1, beta2.col(1), kap2[1], spec2));
  CHECK(conditional_loglik(y2, mask3, alpha2, beta2, kap2, spec2) ==
        doctest::Approx(row1).epsilon(1e-12));
}

TEST_CASE("waic edge cases and oracle") {
  // Single draw, one respondent.
  arma::mat one(1, 1);
  one(0, 0) = std::log(0.37);
  WaicResult w1 = waic(one);
  CHECK(w1.p_waic == 0.0);
  CHECK(w1.waic == doctest::Approx(-2.0 * std::log(0.37)).epsilon(1e-12));

  // Constant over draws: zero penalty.
  arma::mat constant(40, 7);
  for (int n = 0; n < 7; ++n) constant.col(n).fill(-0.3 * (n + 1));
  WaicResult wc = waic(constant);
  CHECK(wc.p_waic == doctest::Approx(0.0));
  CHECK(wc.waic == doctest::Approx(-2.0 * arma::accu(constant.row(0))).epsilon(1e-10));

  // Random matrix against the independent implementation.
  RngStream rng(88, 1);
  arma::mat ll(50, 20);
  for (auto& v : ll) v = -2.0 + 1.5 * sample_normal(rng);
  WaicResult w = waic(ll);
  oracle::NaiveWaic nv = oracle::naive_waic(ll);
  CHECK(w.waic == doctest::Approx(nv.waic).epsilon(1e-8));
  CHECK(w.lppd == doctest::Approx(nv.lppd).epsilon(1e-8));
  CHECK(w.p_waic == doctest::Approx(nv.p_waic).epsilon(1e-8));

  // Log-sum-exp path survives where the naive path underflows.
  arma::mat deep(10, 2);
  deep.fill(-1000.0);
  WaicResult wd = waic(deep);
  CHECK(std::isfinite(wd.waic));
  CHECK(wd.lppd == doctest::Approx(-2000.0));
}

TEST_CASE("waic invariances") {
  RngStream rng(89, 1);
  arma::mat ll(30, 12);
  for (auto& v : ll) v = -1.0 + sample_normal(rng);
  const WaicResult base = waic(ll);

  arma::uvec rowp = arma::randperm(30), colp = arma::randperm(12);
  arma::mat shuffled = ll.rows(rowp);
  shuffled = shuffled.cols(colp);
  const WaicResult perm = waic(shuffled);
  CHECK(perm.waic == doctest::Approx(base.waic).epsilon(1e-12));
  CHECK(perm.lppd == doctest::Approx(base.lppd).epsilon(1e-12));
  CHECK(perm.p_waic == doctest::Approx(base.p_waic).epsilon(1e-12));
}

TEST_CASE("geweke_z null behaviour, separation, and errors") {
  RngStream rng(90, 1);
  int extreme = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    arma::vec x(10000);
    for (auto& v : x) v = sample_normal(rng);
    if (std::fabs(geweke_z(x)) >= 3.0) ++extreme;
  }
  CHECK(extreme <= trials / 100);  // |z| < 3 in at least 99% of trials

  // Clear mean shift: huge statistic.
  arma::vec shifted(2000);
  for (int i = 0; i < 2000; ++i)
    shifted[i] = (i < 1000 ? 0.0 : 5.0) + sample_normal(rng);
  CHECK(std::fabs(geweke_z(shifted)) > 10.0);

  arma::vec flat(500, arma::fill::ones);
  CHECK_THROWS(geweke_z(flat));
  arma::vec ok(500, arma::fill::randn);
  CHECK_THROWS(geweke_z(ok, 0.6, 0.5));  // overlapping windows
  arma::vec tiny(50, arma::fill::randn);
  CHECK_THROWS(geweke_z(tiny));
}

TEST_CASE("iact on iid and AR(1) series") {
  RngStream rng(91, 1);
  arma::vec iid(100000);
  for (auto& v : iid) v = sample_normal(rng);
  CHECK(iact(iid) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(ess(iid) == doctest::Approx(100000.0 / iact(iid)).epsilon(1e-12));

  // AR(1) with phi = 0.9: IACT = (1 + phi) / (1 - phi) = 19.
  const double phi = 0.9;
  arma::vec ar(1000000);
  double x = 0.0;
  const double innov = std::sqrt(1.0 - phi * phi);
  for (auto& v : ar) {
    x = phi * x + innov * sample_normal(rng);
    v = x;
  }
  const double tau = iact(ar);
  CHECK(tau == doctest::Approx(19.0).epsilon(1.5 / 19.0));

  // Translation and positive-scale invariance.
  CHECK(iact(2.5 * ar + 7.0) == doctest::Approx(tau).epsilon(1e-10));

  arma::vec flat(500, arma::fill::zeros);
  CHECK_THROWS(iact(flat));
}

namespace {

// Minimal synthetic chain for summary tests (K=1, L=2, one binary item).
Chain tiny_chain(int S, RngStream& rng) {
  Chain c;
  c.K = 1;
  c.L = 2;
  c.D = 1;
  c.meas_order = 1;
  c.trans_order = 1;
  c.M = {2};
  c.N = 4;
  c.T = 1;
  c.sweep_order = "test";
  c.column_convention = ModelSpec::column_convention();
  c.beta.set_size(S, 2);
  c.delta.set_size(S, 2);
  c.kappa.set_size(S, 3);
  c.gamma.set_size(S, 3);
  c.lambda.set_size(S, 1);
  c.xi.set_size(S, 2);
  c.R.set_size(S, 1);
  c.omega.set_size(S);
  c.loglik.set_size(S, 4);
  for (int s = 0; s < S; ++s) {
    c.beta(s, 0) = -0.5 + 0.1 * sample_normal(rng);
    c.beta(s, 1) = 1.2 + 0.1 * sample_normal(rng);
    c.delta(s, 0) = 1.0;
    c.delta(s, 1) = (s % 2 == 0) ? 1.0 : 0.0;
    c.kappa(s, 0) = -kInf;
    c.kappa(s, 1) = 0.0;
    c.kappa(s, 2) = kInf;
    c.gamma(s, 0) = -kInf;
    c.gamma(s, 1) = 0.0;
    c.gamma(s, 2) = kInf;
    c.lambda(s, 0) = 0.4 + 0.05 * sample_normal(rng);
    c.xi(s, 0) = -0.1;
    c.xi(s, 1) = 0.8;
    c.R(s, 0) = 1.0;
    c.omega[s] = 0.5;
    c.loglik.row(s).fill(std::log(0.3));
  }
  return c;
}

}  // namespace

TEST_CASE("summarize_chain: single draw, delta boundary, quantile oracle") {
  RngStream rng(92, 1);
  // Single-draw chain: means equal the draw.
  Chain single = tiny_chain(1, rng);
  ChainSummary s1 = summarize_chain(single);
  CHECK(s1.beta.mean[0] == doctest::Approx(single.beta(0, 0)));
  CHECK(s1.beta.mean[1] == doctest::Approx(single.beta(0, 1)));
  CHECK(s1.lambda.mean[0] == doctest::Approx(single.lambda(0, 0)));
  // Single-draw eta equals the emissions table of that draw.
  const arma::vec eta0 = arma::vectorise(eta_of_draw(single, 0));
  for (arma::uword i = 0; i < eta0.n_elem; ++i)
    CHECK(s1.eta.mean[i] == doctest::Approx(eta0[i]));

  // Delta posterior frequency exactly 0.5 -> mode 0 (strict inequality).
  Chain even = tiny_chain(10, rng);
  for (int s = 0; s < 10; ++s) even.delta(s, 1) = (s < 5) ? 1.0 : 0.0;
  ChainSummary se = summarize_chain(even);
  CHECK(se.delta_mean[1] == doctest::Approx(0.5));
  CHECK(se.delta_mode[1] == 0);

  // Credible interval endpoints match an order-statistic oracle.
  Chain big = tiny_chain(1000, rng);
  ChainSummary sb = summarize_chain(big, 0.95);
  {
    arma::vec col = big.beta.col(1);
    std::sort(col.begin(), col.end());
    auto q = [&](double p) {
      const double h = (col.n_elem - 1) * p;
      const std::size_t i = static_cast<std::size_t>(h);
      const double frac = h - static_cast<double>(i);
      return col[i] + frac * (col[std::min(i + 1, static_cast<std::size_t>(col.n_elem - 1))] - col[i]);
    };
    CHECK(sb.beta.lo[1] == doctest::Approx(q(0.025)).epsilon(1e-12));
    CHECK(sb.beta.hi[1] == doctest::Approx(q(0.975)).epsilon(1e-12));
  }
  // Sparsity flag: beta main effect clearly positive, so 0 outside the CI.
  CHECK(sb.beta.zero_in_ci[1] == 0);
  CHECK(sb.beta.zero_in_ci[0] == 1 - (sb.beta.hi[0] < 0.0 ? 1 : 0));
}
