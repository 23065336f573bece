#include <armadillo>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "lrlcm/dist.hpp"
#include "lrlcm/rng.hpp"
#include "oracles.hpp"

using namespace lrlcm;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("normal_cdf basic values and quadrature oracle") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(-kInf) == 0.0);
  CHECK(normal_cdf(kInf) == 1.0);
  CHECK(normal_cdf(1.5) == doctest::Approx(0.9331928).epsilon(1e-6));
  for (double x : {-6.0, -3.2, -1.5, -0.3, 0.7, 1.5, 2.9, 5.5}) {
    CHECK(std::fabs(normal_cdf(x) - oracle::normal_cdf_quadrature(x)) < 1e-12);
  }
  CHECK_THROWS(normal_cdf(std::nan("")));
}

TEST_CASE("normal_cdf monotone and symmetric on a grid") {
  double prev = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = -10.0 + 20.0 * i / 10000.0;
    const double p = normal_cdf(x);
    CHECK(p >= prev);
    CHECK(std::fabs(p + normal_cdf(-x) - 1.0) < 1e-12);
    prev = p;
  }
}

TEST_CASE("normal_quantile inverts normal_cdf") {
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    const double x = normal_quantile(p);
    CHECK(normal_cdf(x) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK_THROWS(normal_quantile(0.0));
  CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("log_normal_cdf matches log(Phi) and extends into the far tail") {
  for (double x : {-8.5, -5.0, -1.0, 0.0, 2.0, 9.0})
    CHECK(log_normal_cdf(x) ==
          doctest::Approx(std::log(normal_cdf(x))).epsilon(1e-12));
  // Far tail: compare against the quadrature oracle in log space.
  const double lx = log_normal_cdf(-40.0);
  CHECK(lx < -700.0);
  CHECK(std::isfinite(lx));
}

TEST_CASE("log_normal_cdf_interval stable in both tails") {
  // Straddling zero.
  CHECK(log_normal_cdf_interval(-1.0, 1.0) ==
        doctest::Approx(std::log(normal_cdf(1.0) - normal_cdf(-1.0)))
            .epsilon(1e-12));
  // Both endpoints deep in the upper tail, where naive subtraction is 0.
  const double v = log_normal_cdf_interval(20.0, 21.0);
  const double expected = log_normal_cdf(-20.0) +
                          std::log1p(-std::exp(log_normal_cdf(-21.0) -
                                               log_normal_cdf(-20.0)));
  CHECK(v == doctest::Approx(expected).epsilon(1e-10));
  CHECK(std::isfinite(log_normal_cdf_interval(-31.0, -30.0)));
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(123, 7), b(123, 7), c(123, 8);
  std::vector<double> da, db, dc;
  for (int i = 0; i < 64; ++i) {
    da.push_back(a.uniform());
    db.push_back(b.uniform());
    dc.push_back(c.uniform());
  }
  CHECK(da == db);
  CHECK(da != dc);
}

TEST_CASE("truncated normal: untruncated case passes KS against Phi") {
  RngStream rng(2024, 1);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = sample_truncated_normal(0.0, 1.0, -kInf, kInf, rng);
  const double ks =
      oracle::ks_statistic(draws, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
  CHECK(ks < oracle::ks_critical(draws.size(), 0.001));
}

TEST_CASE("truncated normal: half-normal mean") {
  RngStream rng(2024, 2);
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += sample_truncated_normal(0.0, 1.0, 0.0, kInf, rng);
  CHECK(s / n == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.0125));
}

TEST_CASE("truncated normal: window and error cases") {
  RngStream rng(2024, 3);
  for (int i = 0; i < 2000; ++i) {
    const double x = sample_truncated_normal(0.3, 2.0, -0.5, 0.9, rng);
    CHECK(x > -0.5);
    CHECK(x <= 0.9);
  }
  // Far-tail windows hit the rejection branch and stay in range.
  for (int i = 0; i < 2000; ++i) {
    const double x = sample_truncated_normal(0.0, 1.0, 7.0, 7.5, rng);
    CHECK(x > 7.0);
    CHECK(x <= 7.5);
  }
  for (int i = 0; i < 2000; ++i) {
    const double x = sample_truncated_normal(0.0, 1.0, -kInf, -9.0, rng);
    CHECK(x <= -9.0);
  }
  CHECK_THROWS(sample_truncated_normal(0.0, 1.0, 3.0, 2.0, rng));
  CHECK_THROWS(sample_truncated_normal(0.0, -1.0, 0.0, 1.0, rng));
}

TEST_CASE("truncated normal: tail draws follow the truncated law") {
  RngStream rng(2024, 4);
  std::vector<double> draws(100000);
  const double a = 6.0;
  for (auto& d : draws) d = sample_truncated_normal(0.0, 1.0, a, kInf, rng);
  // cdf of the tail-truncated normal via stable log masses
  auto cdf = [&](double x) {
    const double la = log_normal_cdf(-a);
    const double lx = log_normal_cdf(-x);
    return 1.0 - std::exp(lx - la);
  };
  const double ks = oracle::ks_statistic(draws, cdf);
  CHECK(ks < oracle::ks_critical(draws.size(), 0.001));
}

TEST_CASE("truncated exponential: mean and shift property") {
  RngStream rng(99, 1);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_trunc_exponential(1.0, 0.0, kInf, rng);
  CHECK(s / n == doctest::Approx(1.0).epsilon(0.02));

  const double rate = 2.5, c = 4.0;
  std::vector<double> draws(n);
  for (auto& d : draws) d = sample_trunc_exponential(rate, c, kInf, rng) - c;
  const double ks = oracle::ks_statistic(
      draws, [&](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-rate * x); });
  CHECK(ks < oracle::ks_critical(n, 0.001));

  CHECK_THROWS(sample_trunc_exponential(1.0, 2.0, 2.0, rng));
  CHECK_THROWS(sample_trunc_exponential(0.0, 0.0, 1.0, rng));
  CHECK_THROWS(sample_trunc_exponential(1.0, -kInf, 1.0, rng));
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_trunc_exponential(0.5, 1.0, 1.5, rng);
    CHECK(x > 1.0);
    CHECK(x < 1.5);
  }
}

TEST_CASE("inverse Wishart moments") {
  RngStream rng(7, 1);
  // K = 1: inverse gamma mean 2 / (5 - 2).
  {
    arma::mat scale(1, 1);
    scale(0, 0) = 2.0;
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += sample_inverse_wishart(scale, 5.0, rng)(0, 0);
    CHECK(s / n == doctest::Approx(2.0 / 3.0).epsilon(0.03));
  }
  // K = 2 identity, dof 10: mean I / 7.
  {
    arma::mat scale = arma::eye(2, 2);
    arma::mat acc(2, 2, arma::fill::zeros);
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += sample_inverse_wishart(scale, 10.0, rng);
    acc /= n;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        CHECK(std::fabs(acc(a, b) - (a == b ? 1.0 / 7.0 : 0.0)) < 0.01);
  }
  // Draws are PD.
  {
    arma::mat scale = {{2.0, 0.3}, {0.3, 1.0}};
    for (int i = 0; i < 200; ++i)
      CHECK(is_positive_definite(sample_inverse_wishart(scale, 4.0, rng)));
  }
  arma::mat bad = {{1.0, 2.0}, {2.0, 1.0}};  // eigenvalues -1, 3
  CHECK_THROWS(sample_inverse_wishart(bad, 10.0, rng));
  CHECK_THROWS(sample_inverse_wishart(arma::eye(3, 3), 1.5, rng));
}

TEST_CASE("matrix normal: independence case, mean, and Kronecker covariance") {
  RngStream rng(11, 1);
  const int n = 100000;
  // Identity covariances: entries iid standard normal.
  {
    std::vector<double> draws;
    draws.reserve(n);
    arma::mat mean(2, 2, arma::fill::zeros);
    arma::mat I2 = arma::eye(2, 2);
    for (int i = 0; i < n / 4; ++i) {
      arma::mat X = sample_matrix_normal(mean, I2, I2, rng);
      for (double v : X) draws.push_back(v);
    }
    const double ks = oracle::ks_statistic(
        draws, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
    CHECK(ks < oracle::ks_critical(draws.size(), 0.001));
  }
  // Monte Carlo covariance of vec(X') against row_cov (x) col_cov.
  {
    arma::mat mean = {{1.0, -2.0}, {0.5, 0.0}, {3.0, 1.0}};  // 3 x 2
    arma::mat U = {{1.0, 0.4, 0.1}, {0.4, 1.5, -0.2}, {0.1, -0.2, 0.8}};
    arma::mat V = {{1.2, -0.3}, {-0.3, 0.7}};
    arma::mat acc_mean(3, 2, arma::fill::zeros);
    arma::mat acc_cov(6, 6, arma::fill::zeros);
    for (int i = 0; i < n; ++i) {
      arma::mat X = sample_matrix_normal(mean, U, V, rng);
      acc_mean += X;
      arma::vec v = arma::vectorise((X - mean).t());
      acc_cov += v * v.t();
    }
    acc_mean /= n;
    acc_cov /= n;
    const arma::mat want = arma::kron(U, V);
    CHECK(arma::abs(acc_cov - want).max() < 0.05);
    CHECK(arma::abs(acc_mean - mean).max() < 0.02);
  }
  CHECK_THROWS(sample_matrix_normal(arma::zeros(2, 2), arma::eye(3, 3),
                                    arma::eye(2, 2), rng));
}

TEST_CASE("mvn_rect_prob univariate, independence, and orthant oracle") {
  arma::vec zero1(1, arma::fill::zeros), zero2(2, arma::fill::zeros);
  arma::vec lo1 = {-kInf}, hi1 = {0.0};
  CHECK(mvn_rect_prob(zero1, arma::eye(1, 1), lo1, hi1) ==
        doctest::Approx(0.5).epsilon(1e-12));

  arma::vec lo2 = {-kInf, -kInf}, hi2 = {0.0, 0.0};
  CHECK(mvn_rect_prob(zero2, arma::eye(2, 2), lo2, hi2) ==
        doctest::Approx(0.25).epsilon(1e-4));

  arma::mat R = {{1.0, 0.5}, {0.5, 1.0}};
  const double want = 0.25 + std::asin(0.5) / (2.0 * M_PI);
  CHECK(std::fabs(mvn_rect_prob(zero2, R, lo2, hi2) - want) < 1e-4);

  CHECK_THROWS(mvn_rect_prob(zero2, R, hi2, lo2));
  arma::mat notpd = {{1.0, 1.5}, {1.5, 1.0}};
  CHECK_THROWS(mvn_rect_prob(zero2, notpd, lo2, hi2));
}

TEST_CASE("mvn_rect_prob is deterministic") {
  arma::vec mean = {0.2, -0.1, 0.4};
  arma::mat R = {{1.0, 0.3, -0.2}, {0.3, 1.0, 0.1}, {-0.2, 0.1, 1.0}};
  arma::vec lo = {-1.0, -kInf, 0.0}, hi = {1.0, 0.5, 2.0};
  CHECK(mvn_rect_prob(mean, R, lo, hi) == mvn_rect_prob(mean, R, lo, hi));
}

TEST_CASE("mvn_rect_prob partition of unity for K <= 4") {
  RngStream rng(5150, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 1 + static_cast<int>(rng.uniform() * 4.0);
    const int L = 2 + static_cast<int>(rng.uniform() * 2.0);
    // Random correlation matrix: normalized Wishart-style.
    arma::mat A(K, K);
    for (auto& v : A) v = sample_normal(rng);
    arma::mat S = A * A.t() + 0.3 * arma::eye(K, K);
    arma::vec d = 1.0 / arma::sqrt(S.diag());
    arma::mat R = S;
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) R(i, j) *= d[i] * d[j];
    R.diag().ones();
    // Random increasing thresholds per dimension: L windows each.
    arma::mat thr(K, L + 1);
    for (int k = 0; k < K; ++k) {
      thr(k, 0) = -kInf;
      double v = -1.5 + rng.uniform();
      for (int l = 1; l < L; ++l) {
        thr(k, l) = v;
        v += 0.3 + 1.2 * rng.uniform();
      }
      thr(k, L) = kInf;
    }
    arma::vec mean(K);
    for (auto& v : mean) v = sample_normal(rng) * 0.5;

    double total = 0.0;
    std::vector<int> idx(K, 0);
    for (;;) {
      arma::vec lo(K), hi(K);
      for (int k = 0; k < K; ++k) {
        lo[k] = thr(k, idx[k]);
        hi[k] = thr(k, idx[k] + 1);
      }
      total += mvn_rect_prob(mean, R, lo, hi);
      int k = K - 1;
      while (k >= 0 && idx[k] == L - 1) idx[k--] = 0;
      if (k < 0) break;
      ++idx[k];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("categorical sampler") {
  RngStream rng(3, 1);
  arma::vec degenerate = {0.0, 1.0, 0.0};
  for (int i = 0; i < 50; ++i) CHECK(sample_categorical(degenerate, rng) == 1);

  arma::vec even = {1.0, 1.0};
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ones += static_cast<int>(sample_categorical(even, rng));
  CHECK(static_cast<double>(ones) / n == doctest::Approx(0.5).epsilon(0.02));

  arma::vec neg = {-1.0, 2.0};
  CHECK_THROWS(sample_categorical(neg, rng));
  arma::vec zeros = {0.0, 0.0};
  CHECK_THROWS(sample_categorical(zeros, rng));
}

TEST_CASE("gamma and beta samplers match closed-form means") {
  RngStream rng(17, 1);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_gamma(3.7, rng);
  CHECK(s / n == doctest::Approx(3.7).epsilon(0.02));
  s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_beta(2.0, 6.0, rng);
  CHECK(s / n == doctest::Approx(0.25).epsilon(0.02));
  s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_chisq(5.0, rng);
  CHECK(s / n == doctest::Approx(5.0).epsilon(0.02));
}
